//! Declared perimeter: the fleet, and the parsers that build it.
//!
//! Two inventory sources are supported: the native fleet CSV (one row per
//! asset, room, compute campaign, external service or cable bulk) and GLPI
//! CSV exports mapped onto categories by an ordered list of [`MappingRule`]s.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{InventoryError, Severity};
use crate::factors::{EquipmentCategory, FactorDatabase, HourProfile, Scope};

pub const FLEET_CSV_HEADER: [&str; 10] = [
    "kind",
    "id",
    "category",
    "quantity",
    "acquisition_year",
    "disposal_year",
    "status",
    "measured_power_w",
    "vendor_fab_kgco2e",
    "extra",
];

/// Default age above which an asset is flagged as a replacement candidate.
pub const DEFAULT_AGE_WARNING_YEARS: i32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssetStatus {
    InUse,
    Stored,
}

impl AssetStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            AssetStatus::InUse => "in_use",
            AssetStatus::Stored => "stored",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub id: String,
    pub category: EquipmentCategory,
    pub quantity: u32,
    pub acquisition_year: i32,
    pub disposal_year: Option<i32>,
    pub status: AssetStatus,
    pub measured_power_w: Option<f64>,
    pub vendor_fab_transport_kgco2e: Option<f64>,
    /// Only `WorkYear` or `Continuous`.
    pub hour_profile_override: Option<HourProfile>,
    /// Server room hosting the asset, for UPS overhead and room metering.
    pub room: Option<String>,
}

impl Asset {
    pub fn new(
        id: impl Into<String>,
        category: EquipmentCategory,
        quantity: u32,
        acquisition_year: i32,
    ) -> Self {
        Asset {
            id: id.into(),
            category,
            quantity,
            acquisition_year,
            disposal_year: None,
            status: AssetStatus::InUse,
            measured_power_w: None,
            vendor_fab_transport_kgco2e: None,
            hour_profile_override: None,
            room: None,
        }
    }

    /// Whether the asset is part of the fleet at some point during `year`.
    pub fn is_present_in(&self, year: i32) -> bool {
        self.acquisition_year <= year && self.disposal_year.is_none_or(|d| d >= year)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerRoom {
    pub id: String,
    pub refrigerant_fluid: Option<String>,
    pub refrigerant_leak_kg_per_year: f64,
    pub ups_overhead_fraction: f64,
    pub measured_room_kwh_per_year: Option<f64>,
}

impl ServerRoom {
    pub fn new(id: impl Into<String>) -> Self {
        ServerRoom {
            id: id.into(),
            refrigerant_fluid: None,
            refrigerant_leak_kg_per_year: 0.0,
            ups_overhead_fraction: 0.0,
            measured_room_kwh_per_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeCampaign {
    pub id: String,
    pub kwh: Option<f64>,
    pub core_hours: Option<f64>,
    pub watts_per_core: Option<f64>,
    pub pue: f64,
}

impl ComputeCampaign {
    pub fn is_complete(&self) -> bool {
        self.kwh.is_some() || (self.core_hours.is_some() && self.watts_per_core.is_some())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalServiceEntry {
    pub id: String,
    pub declared_kgco2e: f64,
    /// `S2` or `S3`.
    pub scope_label: Scope,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CableBulk {
    pub id: String,
    /// `cable_cat5` or `cable_hdmi`.
    pub category: EquipmentCategory,
    pub count_acquired: u32,
    pub acquisition_year: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fleet {
    pub perimeter_description: String,
    pub reporting_year: i32,
    pub assets: Vec<Asset>,
    pub rooms: Vec<ServerRoom>,
    pub campaigns: Vec<ComputeCampaign>,
    pub external_services: Vec<ExternalServiceEntry>,
    pub cable_bulks: Vec<CableBulk>,
}

impl Fleet {
    pub fn new(perimeter_description: impl Into<String>, reporting_year: i32) -> Self {
        Fleet {
            perimeter_description: perimeter_description.into(),
            reporting_year,
            assets: Vec::new(),
            rooms: Vec::new(),
            campaigns: Vec::new(),
            external_services: Vec::new(),
            cable_bulks: Vec::new(),
        }
    }

    pub fn asset(&self, id: &str) -> Option<&Asset> {
        self.assets.iter().find(|a| a.id == id)
    }

    pub fn entry_count(&self) -> usize {
        self.assets.len()
            + self.rooms.len()
            + self.campaigns.len()
            + self.external_services.len()
            + self.cable_bulks.len()
    }
}

/// `# perimeter: ...` and `# year: ...` directives found in a fleet CSV's
/// leading comment lines.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FleetDirectives {
    pub perimeter: Option<String>,
    pub year: Option<i32>,
}

pub fn scan_directives(text: &str) -> FleetDirectives {
    let mut out = FleetDirectives::default();
    for line in text.lines() {
        let Some(comment) = line.trim().strip_prefix('#') else {
            continue;
        };
        if let Some((key, value)) = comment.split_once(':') {
            match key.trim() {
                "perimeter" if out.perimeter.is_none() => {
                    out.perimeter = Some(value.trim().to_string())
                }
                "year" if out.year.is_none() => out.year = value.trim().parse().ok(),
                _ => {}
            }
        }
    }
    out
}

struct Extra<'a> {
    row: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Extra<'a> {
    fn parse(row: usize, text: &'a str, allowed: &[&'static str]) -> Result<Self, InventoryError> {
        let mut pairs: Vec<(&str, &str)> = Vec::new();
        let mut rest = text.trim();
        while !rest.is_empty() {
            let (key, after) = rest.split_once('=').ok_or_else(|| InventoryError::Syntax {
                row,
                message: format!("expected key=value in extra, found `{rest}`"),
            })?;
            let key = key.trim();
            // `note` swallows the remainder so free text may contain ';'.
            let (value, next) = if key == "note" {
                (after, "")
            } else {
                after.split_once(';').unwrap_or((after, ""))
            };
            if !allowed.contains(&key) {
                return Err(InventoryError::Syntax {
                    row,
                    message: format!("unknown extra key `{key}`"),
                });
            }
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(InventoryError::Syntax {
                    row,
                    message: format!("extra key `{key}` repeated"),
                });
            }
            pairs.push((key, value.trim()));
            rest = next.trim();
        }
        Ok(Extra { row, pairs })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .filter(|v| !v.is_empty())
    }

    fn number(&self, key: &'static str) -> Result<Option<f64>, InventoryError> {
        self.get(key)
            .map(|v| non_negative(self.row, key, v))
            .transpose()
    }
}

fn non_negative(row: usize, field: &'static str, raw: &str) -> Result<f64, InventoryError> {
    let value: f64 = raw.parse().map_err(|_| InventoryError::Invalid {
        row,
        field,
        message: format!("`{raw}` is not a number"),
    })?;
    if !value.is_finite() || value < 0.0 {
        return Err(InventoryError::Invalid {
            row,
            field,
            message: format!("{raw} must be a finite non-negative number"),
        });
    }
    Ok(value)
}

fn opt_non_negative(
    row: usize,
    field: &'static str,
    raw: &str,
) -> Result<Option<f64>, InventoryError> {
    if raw.is_empty() {
        Ok(None)
    } else {
        non_negative(row, field, raw).map(Some)
    }
}

fn year(row: usize, field: &'static str, raw: &str) -> Result<i32, InventoryError> {
    raw.parse().map_err(|_| InventoryError::Invalid {
        row,
        field,
        message: format!("`{raw}` is not a year"),
    })
}

fn fraction(row: usize, field: &'static str, value: f64) -> Result<f64, InventoryError> {
    if value > 1.0 {
        return Err(InventoryError::Invalid {
            row,
            field,
            message: format!("{value} is not a fraction in [0, 1]"),
        });
    }
    Ok(value)
}

fn non_empty_id(row: usize, raw: &str) -> Result<String, InventoryError> {
    if raw.is_empty() {
        return Err(InventoryError::Invalid {
            row,
            field: "id",
            message: "must not be empty".into(),
        });
    }
    Ok(raw.to_string())
}

/// Parses the nine asset columns that follow `kind` in a fleet CSV row
/// (`id` through `extra`). Scenario action files reuse this layout.
///
/// An empty `acquisition_year` falls back to `default_year` when given.
pub fn parse_asset_fields(
    row: usize,
    fields: &[&str],
    default_year: Option<i32>,
) -> Result<Asset, InventoryError> {
    if fields.len() != 9 {
        return Err(InventoryError::Syntax {
            row,
            message: format!("expected 9 asset fields, found {}", fields.len()),
        });
    }
    let id = non_empty_id(row, fields[0])?;
    let category: EquipmentCategory =
        fields[1]
            .parse()
            .map_err(
                |e: crate::factors::UnknownCategory| InventoryError::Invalid {
                    row,
                    field: "category",
                    message: e.to_string(),
                },
            )?;
    if !category.is_asset_category() {
        return Err(InventoryError::Invalid {
            row,
            field: "category",
            message: format!("`{category}` cannot be an inventory asset"),
        });
    }
    let quantity: u32 = fields[2].parse().map_err(|_| InventoryError::Invalid {
        row,
        field: "quantity",
        message: format!("`{}` is not a positive integer", fields[2]),
    })?;
    if quantity == 0 {
        return Err(InventoryError::Invalid {
            row,
            field: "quantity",
            message: "must be at least 1".into(),
        });
    }
    let acquisition_year = match (fields[3], default_year) {
        ("", Some(y)) => y,
        (raw, _) => year(row, "acquisition_year", raw)?,
    };
    let disposal_year = if fields[4].is_empty() {
        None
    } else {
        Some(year(row, "disposal_year", fields[4])?)
    };
    if let Some(d) = disposal_year {
        if d < acquisition_year {
            return Err(InventoryError::Invalid {
                row,
                field: "disposal_year",
                message: format!("disposal year {d} precedes acquisition year {acquisition_year}"),
            });
        }
    }
    let status = match fields[5] {
        "" | "in_use" => AssetStatus::InUse,
        "stored" => AssetStatus::Stored,
        other => {
            return Err(InventoryError::Invalid {
                row,
                field: "status",
                message: format!("expected in_use|stored, found `{other}`"),
            })
        }
    };
    let extra = Extra::parse(row, fields[8], &["profile", "room"])?;
    let hour_profile_override = match extra.get("profile") {
        None => None,
        Some("work_year") => Some(HourProfile::WorkYear),
        Some("continuous") => Some(HourProfile::Continuous),
        Some(other) => {
            return Err(InventoryError::Invalid {
                row,
                field: "profile",
                message: format!("expected work_year|continuous, found `{other}`"),
            })
        }
    };
    Ok(Asset {
        id,
        category,
        quantity,
        acquisition_year,
        disposal_year,
        status,
        measured_power_w: opt_non_negative(row, "measured_power_w", fields[6])?,
        vendor_fab_transport_kgco2e: opt_non_negative(row, "vendor_fab_kgco2e", fields[7])?,
        hour_profile_override,
        room: extra.get("room").map(str::to_string),
    })
}

fn parse_room(row: usize, fields: &[&str]) -> Result<ServerRoom, InventoryError> {
    let extra = Extra::parse(
        row,
        fields[9],
        &["fluid", "leak_kg", "ups_overhead", "room_kwh"],
    )?;
    let leak = extra.number("leak_kg")?.unwrap_or(0.0);
    let fluid = extra.get("fluid").map(str::to_string);
    if leak > 0.0 && fluid.is_none() {
        return Err(InventoryError::Invalid {
            row,
            field: "fluid",
            message: format!("required when leak_kg is {leak}"),
        });
    }
    Ok(ServerRoom {
        id: non_empty_id(row, fields[1])?,
        refrigerant_fluid: fluid,
        refrigerant_leak_kg_per_year: leak,
        ups_overhead_fraction: fraction(
            row,
            "ups_overhead",
            extra.number("ups_overhead")?.unwrap_or(0.0),
        )?,
        measured_room_kwh_per_year: extra.number("room_kwh")?,
    })
}

fn parse_campaign(row: usize, fields: &[&str]) -> Result<ComputeCampaign, InventoryError> {
    let extra = Extra::parse(
        row,
        fields[9],
        &["kwh", "core_hours", "watts_per_core", "pue"],
    )?;
    let pue = extra.number("pue")?.unwrap_or(1.0);
    if pue < 1.0 {
        return Err(InventoryError::Invalid {
            row,
            field: "pue",
            message: format!("{pue} is below 1"),
        });
    }
    Ok(ComputeCampaign {
        id: non_empty_id(row, fields[1])?,
        kwh: extra.number("kwh")?,
        core_hours: extra.number("core_hours")?,
        watts_per_core: extra.number("watts_per_core")?,
        pue,
    })
}

fn parse_external(row: usize, fields: &[&str]) -> Result<ExternalServiceEntry, InventoryError> {
    let extra = Extra::parse(row, fields[9], &["kgco2e", "scope", "note"])?;
    let declared = extra.number("kgco2e")?.ok_or(InventoryError::Invalid {
        row,
        field: "kgco2e",
        message: "required for external entries".into(),
    })?;
    let scope = match extra.get("scope") {
        Some("S2") => Scope::S2,
        Some("S3") => Scope::S3,
        other => {
            return Err(InventoryError::Invalid {
                row,
                field: "scope",
                message: format!("expected S2|S3, found `{}`", other.unwrap_or("")),
            })
        }
    };
    Ok(ExternalServiceEntry {
        id: non_empty_id(row, fields[1])?,
        declared_kgco2e: declared,
        scope_label: scope,
        note: extra.get("note").unwrap_or("").to_string(),
    })
}

fn parse_cable(
    row: usize,
    fields: &[&str],
    reporting_year: i32,
) -> Result<CableBulk, InventoryError> {
    let category = match fields[2] {
        "cable_cat5" => EquipmentCategory::CableCat5,
        "cable_hdmi" => EquipmentCategory::CableHdmi,
        other => {
            return Err(InventoryError::Invalid {
                row,
                field: "category",
                message: format!("expected cable_cat5|cable_hdmi, found `{other}`"),
            })
        }
    };
    let count: u32 = fields[3].parse().map_err(|_| InventoryError::Invalid {
        row,
        field: "quantity",
        message: format!("`{}` is not a cable count", fields[3]),
    })?;
    let acquisition_year = if fields[4].is_empty() {
        reporting_year
    } else {
        year(row, "acquisition_year", fields[4])?
    };
    Ok(CableBulk {
        id: non_empty_id(row, fields[1])?,
        category,
        count_acquired: count,
        acquisition_year,
    })
}

fn check_unique<'a>(
    list: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<(), InventoryError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(InventoryError::DuplicateId {
                list,
                id: id.to_string(),
            });
        }
    }
    Ok(())
}

fn check_fleet_ids(fleet: &Fleet) -> Result<(), InventoryError> {
    check_unique("asset", fleet.assets.iter().map(|a| a.id.as_str()))?;
    check_unique("room", fleet.rooms.iter().map(|r| r.id.as_str()))?;
    check_unique("campaign", fleet.campaigns.iter().map(|c| c.id.as_str()))?;
    check_unique(
        "external",
        fleet.external_services.iter().map(|e| e.id.as_str()),
    )?;
    check_unique("cable", fleet.cable_bulks.iter().map(|c| c.id.as_str()))
}

fn csv_syntax(err: csv::Error) -> InventoryError {
    let row = err
        .position()
        .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0));
    InventoryError::Syntax {
        row,
        message: err.to_string(),
    }
}

/// Parses a fleet CSV. Rows are dispatched on their `kind` column.
pub fn parse_fleet_csv(
    text: &str,
    reporting_year: i32,
    perimeter_description: &str,
) -> Result<Fleet, InventoryError> {
    if perimeter_description.trim().is_empty() {
        return Err(InventoryError::EmptyPerimeter);
    }
    let mut fleet = Fleet::new(perimeter_description, reporting_year);
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());

    let header = reader.headers().map_err(csv_syntax)?.clone();
    if header.is_empty() {
        return Ok(fleet);
    }
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != FLEET_CSV_HEADER {
        return Err(InventoryError::Syntax {
            row: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                FLEET_CSV_HEADER.join(","),
                found.join(",")
            ),
        });
    }

    for record in reader.records() {
        let record = record.map_err(csv_syntax)?;
        let row = record
            .position()
            .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0));
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        if fields.len() != FLEET_CSV_HEADER.len() {
            return Err(InventoryError::Syntax {
                row,
                message: format!(
                    "expected {} fields, found {}",
                    FLEET_CSV_HEADER.len(),
                    fields.len()
                ),
            });
        }
        match fields[0] {
            "asset" => fleet
                .assets
                .push(parse_asset_fields(row, &fields[1..], None)?),
            "room" => fleet.rooms.push(parse_room(row, &fields)?),
            "campaign" => fleet.campaigns.push(parse_campaign(row, &fields)?),
            "external" => fleet.external_services.push(parse_external(row, &fields)?),
            "cable" => fleet
                .cable_bulks
                .push(parse_cable(row, &fields, reporting_year)?),
            other => {
                return Err(InventoryError::Invalid {
                    row,
                    field: "kind",
                    message: format!(
                        "expected asset|room|campaign|external|cable, found `{other}`"
                    ),
                })
            }
        }
    }
    check_fleet_ids(&fleet)?;
    Ok(fleet)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn join_extra(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// Asset columns `id` through `extra`, as read by [`parse_asset_fields`].
pub fn asset_fields(asset: &Asset) -> Vec<String> {
    let mut extra = Vec::new();
    if let Some(p) = asset.hour_profile_override {
        extra.push(("profile", p.as_str().to_string()));
    }
    if let Some(room) = &asset.room {
        extra.push(("room", room.clone()));
    }
    vec![
        asset.id.clone(),
        asset.category.id().to_string(),
        asset.quantity.to_string(),
        asset.acquisition_year.to_string(),
        asset
            .disposal_year
            .map(|y| y.to_string())
            .unwrap_or_default(),
        asset.status.as_str().to_string(),
        opt_num(asset.measured_power_w),
        opt_num(asset.vendor_fab_transport_kgco2e),
        join_extra(&extra),
    ]
}

/// Renders a fleet as CSV, with `# perimeter:` and `# year:` directives.
pub fn render_fleet_csv(fleet: &Fleet) -> String {
    let mut out = format!(
        "# perimeter: {}\n# year: {}\n",
        fleet.perimeter_description.replace('\n', " "),
        fleet.reporting_year
    );
    let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut write = |row: Vec<String>| {
        writer.write_record(&row).expect("write to Vec cannot fail");
    };
    write(FLEET_CSV_HEADER.iter().map(|s| s.to_string()).collect());
    for asset in &fleet.assets {
        let mut row = vec!["asset".to_string()];
        row.extend(asset_fields(asset));
        write(row);
    }
    let blank = |kind: &str, id: &str, category: &str, quantity: String, year: String, extra| {
        vec![
            kind.to_string(),
            id.to_string(),
            category.to_string(),
            quantity,
            year,
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            extra,
        ]
    };
    for room in &fleet.rooms {
        let mut extra = Vec::new();
        if let Some(fluid) = &room.refrigerant_fluid {
            extra.push(("fluid", fluid.clone()));
        }
        extra.push(("leak_kg", room.refrigerant_leak_kg_per_year.to_string()));
        extra.push(("ups_overhead", room.ups_overhead_fraction.to_string()));
        if let Some(kwh) = room.measured_room_kwh_per_year {
            extra.push(("room_kwh", kwh.to_string()));
        }
        write(blank(
            "room",
            &room.id,
            "",
            String::new(),
            String::new(),
            join_extra(&extra),
        ));
    }
    for c in &fleet.campaigns {
        let mut extra = Vec::new();
        if let Some(v) = c.kwh {
            extra.push(("kwh", v.to_string()));
        }
        if let Some(v) = c.core_hours {
            extra.push(("core_hours", v.to_string()));
        }
        if let Some(v) = c.watts_per_core {
            extra.push(("watts_per_core", v.to_string()));
        }
        extra.push(("pue", c.pue.to_string()));
        write(blank(
            "campaign",
            &c.id,
            "",
            String::new(),
            String::new(),
            join_extra(&extra),
        ));
    }
    for e in &fleet.external_services {
        let mut extra = vec![
            ("kgco2e", e.declared_kgco2e.to_string()),
            ("scope", e.scope_label.to_string()),
        ];
        if !e.note.is_empty() {
            extra.push(("note", e.note.clone()));
        }
        write(blank(
            "external",
            &e.id,
            "",
            String::new(),
            String::new(),
            join_extra(&extra),
        ));
    }
    for c in &fleet.cable_bulks {
        write(blank(
            "cable",
            &c.id,
            c.category.id(),
            c.count_acquired.to_string(),
            c.acquisition_year.to_string(),
            String::new(),
        ));
    }
    let body = writer.into_inner().expect("flush to Vec cannot fail");
    out.push_str(&String::from_utf8(body).expect("csv output is UTF-8"));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchField {
    Type,
    Model,
    Name,
}

impl FromStr for MatchField {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type" => Ok(MatchField::Type),
            "model" => Ok(MatchField::Model),
            "name" => Ok(MatchField::Name),
            other => Err(format!("expected type|model|name, found `{other}`")),
        }
    }
}

/// Maps GLPI records onto categories. Patterns containing `*`, `?` or `[`
/// are globs over the whole field; anything else is a substring. Both are
/// case-insensitive.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingRule {
    pub match_field: MatchField,
    pub pattern: String,
    pub target_category: EquipmentCategory,
}

impl MappingRule {
    pub fn new(match_field: MatchField, pattern: &str, target: EquipmentCategory) -> Self {
        MappingRule {
            match_field,
            pattern: pattern.to_string(),
            target_category: target,
        }
    }

    pub fn matches(&self, record: &GlpiRecord) -> bool {
        let value = match self.match_field {
            MatchField::Type => &record.type_,
            MatchField::Model => &record.model,
            MatchField::Name => &record.name,
        };
        if self.pattern.contains(['*', '?', '[']) {
            let options = glob::MatchOptions {
                case_sensitive: false,
                ..Default::default()
            };
            glob::Pattern::new(&self.pattern)
                .map(|p| p.matches_with(value, options))
                .unwrap_or(false)
        } else {
            value.to_lowercase().contains(&self.pattern.to_lowercase())
        }
    }
}

/// Parses a mapping-rules file: `match_field,pattern,target_category` rows,
/// an optional header, `#` comments.
pub fn parse_rules(text: &str) -> Result<Vec<MappingRule>, InventoryError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut rules = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_syntax)?;
        let row = record
            .position()
            .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0));
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        if fields == ["match_field", "pattern", "target_category"] {
            continue;
        }
        if fields.len() != 3 {
            return Err(InventoryError::Syntax {
                row,
                message: format!("expected 3 fields, found {}", fields.len()),
            });
        }
        let match_field = fields[0]
            .parse()
            .map_err(|message| InventoryError::Invalid {
                row,
                field: "match_field",
                message,
            })?;
        if fields[1].is_empty() {
            return Err(InventoryError::Invalid {
                row,
                field: "pattern",
                message: "must not be empty".into(),
            });
        }
        let target: EquipmentCategory =
            fields[2]
                .parse()
                .map_err(
                    |e: crate::factors::UnknownCategory| InventoryError::Invalid {
                        row,
                        field: "target_category",
                        message: e.to_string(),
                    },
                )?;
        if !target.is_asset_category() {
            return Err(InventoryError::Invalid {
                row,
                field: "target_category",
                message: format!("`{target}` cannot be an inventory asset"),
            });
        }
        rules.push(MappingRule::new(match_field, fields[1], target));
    }
    Ok(rules)
}

/// One row of a GLPI export, as read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlpiRecord {
    pub row: usize,
    pub id: Option<String>,
    pub name: String,
    pub type_: String,
    pub model: String,
    pub purchase_date: String,
    pub status: String,
    pub power_w: Option<String>,
}

/// A GLPI record that did not become an asset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnmappedRecord {
    pub record: GlpiRecord,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlpiImport {
    pub fleet: Fleet,
    pub unmapped: Vec<UnmappedRecord>,
    /// Non-fatal import findings (unknown statuses, renamed duplicates).
    pub issues: Vec<Issue>,
}

/// GLPI status text to asset status. Unknown statuses map to `None`.
pub fn glpi_status(raw: &str) -> Option<AssetStatus> {
    match raw.trim().to_lowercase().as_str() {
        "en service" | "used" | "in use" | "in_use" => Some(AssetStatus::InUse),
        "stock" | "storage" | "réserve" | "reserve" | "stored" => Some(AssetStatus::Stored),
        _ => None,
    }
}

/// First four-digit group of a date string: handles `2015-03-12`,
/// `12/03/2015` and `2015-03-12 10:00`.
pub fn year_of_date(raw: &str) -> Option<i32> {
    raw.split(|c: char| !c.is_ascii_digit())
        .find(|tok| tok.len() == 4)
        .and_then(|tok| tok.parse().ok())
}

fn column_index(header: &[String], aliases: &[&str]) -> Option<usize> {
    header.iter().position(|h| aliases.contains(&h.as_str()))
}

/// Reads a GLPI CSV export (`,` or `;` separated) and maps each record to an
/// asset through the first matching rule.
pub fn parse_glpi_export(
    text: &str,
    rules: &[MappingRule],
    reporting_year: i32,
    perimeter_description: &str,
) -> Result<GlpiImport, InventoryError> {
    if perimeter_description.trim().is_empty() {
        return Err(InventoryError::EmptyPerimeter);
    }
    let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = if first_line.matches(';').count() > first_line.matches(',').count() {
        b';'
    } else {
        b','
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.trim_start_matches('\u{feff}').as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_syntax)?
        .iter()
        .map(|h| h.trim().to_lowercase())
        .collect();

    let required = |name: &'static str, aliases: &[&str]| {
        column_index(&header, aliases).ok_or(InventoryError::MissingColumn(name))
    };
    let name_col = required("name", &["name", "nom"])?;
    let type_col = required("type", &["type"])?;
    let model_col = required("model", &["model", "modèle", "modele"])?;
    let date_col = required("purchase_date", &["purchase_date", "date d'achat"])?;
    let status_col = required("status", &["status", "statut"])?;
    let id_col = column_index(&header, &["id"]);
    let power_col = column_index(&header, &["power_w"]);

    let mut fleet = Fleet::new(perimeter_description, reporting_year);
    let mut unmapped = Vec::new();
    let mut issues = Vec::new();
    let mut taken: HashSet<String> = HashSet::new();

    for record in reader.records() {
        let record = record.map_err(csv_syntax)?;
        let row = record
            .position()
            .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0));
        let cell = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let opt_cell = |i: Option<usize>| i.map(cell).filter(|s| !s.is_empty());
        let rec = GlpiRecord {
            row,
            id: opt_cell(id_col),
            name: cell(name_col),
            type_: cell(type_col),
            model: cell(model_col),
            purchase_date: cell(date_col),
            status: cell(status_col),
            power_w: opt_cell(power_col),
        };

        let Some(rule) = rules.iter().find(|r| r.matches(&rec)) else {
            unmapped.push(UnmappedRecord {
                record: rec,
                reason: "no matching rule".into(),
            });
            continue;
        };
        let Some(acquisition_year) = year_of_date(&rec.purchase_date) else {
            unmapped.push(UnmappedRecord {
                reason: format!("unreadable purchase date `{}`", rec.purchase_date),
                record: rec,
            });
            continue;
        };
        let measured_power_w = match &rec.power_w {
            None => None,
            Some(raw) => match non_negative(row, "power_w", raw) {
                Ok(v) => Some(v),
                Err(e) => {
                    unmapped.push(UnmappedRecord {
                        reason: e.to_string(),
                        record: rec,
                    });
                    continue;
                }
            },
        };

        let base = rec
            .id
            .clone()
            .or_else(|| Some(rec.name.clone()).filter(|n| !n.is_empty()))
            .unwrap_or_else(|| format!("glpi-row{row}"));
        let mut id = base.clone();
        if taken.contains(&id) {
            id = format!("{base}~{row}");
            issues.push(Issue::warning(
                &id,
                format!("duplicate GLPI identifier `{base}` renamed"),
            ));
        }
        taken.insert(id.clone());

        let status = glpi_status(&rec.status).unwrap_or_else(|| {
            issues.push(Issue::warning(
                &id,
                format!("unknown GLPI status `{}` treated as in use", rec.status),
            ));
            AssetStatus::InUse
        });
        let mut asset = Asset::new(id, rule.target_category, 1, acquisition_year);
        asset.status = status;
        asset.measured_power_w = measured_power_w;
        fleet.assets.push(asset);
    }
    Ok(GlpiImport {
        fleet,
        unmapped,
        issues,
    })
}

/// A validation finding about one subject (asset, room, category...).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    pub severity: Severity,
    pub subject: String,
    pub message: String,
}

impl Issue {
    pub fn error(subject: &str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Error,
            subject: subject.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(subject: &str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Warning,
            subject: subject.to_string(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.severity, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    pub age_warning_years: i32,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            age_warning_years: DEFAULT_AGE_WARNING_YEARS,
        }
    }
}

pub fn validate_fleet(fleet: &Fleet, db: &FactorDatabase) -> Vec<Issue> {
    validate_fleet_with(fleet, db, ValidationOptions::default())
}

pub fn validate_fleet_with(
    fleet: &Fleet,
    db: &FactorDatabase,
    options: ValidationOptions,
) -> Vec<Issue> {
    let mut issues = Vec::new();
    let year = fleet.reporting_year;

    if fleet.perimeter_description.trim().is_empty() {
        issues.push(Issue::error("perimeter", "perimeter description is empty"));
    }
    if let Err(InventoryError::DuplicateId { list, id }) = check_fleet_ids(fleet) {
        issues.push(Issue::error(&id, format!("duplicate {list} id")));
    }

    let used: BTreeSet<EquipmentCategory> = fleet
        .assets
        .iter()
        .map(|a| a.category)
        .chain(fleet.cable_bulks.iter().map(|c| c.category))
        .collect();
    for category in used {
        if db.lookup(category).is_err() {
            issues.push(Issue::error(
                category.id(),
                format!("missing factor: {category}"),
            ));
        }
    }

    let room_ids: HashSet<&str> = fleet.rooms.iter().map(|r| r.id.as_str()).collect();
    for asset in &fleet.assets {
        let finite_ok = [asset.measured_power_w, asset.vendor_fab_transport_kgco2e]
            .into_iter()
            .flatten()
            .all(|v| v.is_finite() && v >= 0.0);
        if !finite_ok || asset.quantity == 0 {
            issues.push(Issue::error(
                &asset.id,
                "quantity or numeric field out of range",
            ));
        }
        if !asset.category.is_asset_category() {
            issues.push(Issue::error(
                &asset.id,
                format!("category {} cannot be an inventory asset", asset.category),
            ));
        }
        if asset
            .disposal_year
            .is_some_and(|d| d < asset.acquisition_year)
        {
            issues.push(Issue::error(
                &asset.id,
                "disposal year precedes acquisition year",
            ));
        }
        if matches!(
            asset.hour_profile_override,
            Some(HourProfile::NotApplicable)
        ) {
            issues.push(Issue::error(
                &asset.id,
                "hour profile override must be work_year or continuous",
            ));
        }
        if let Some(room) = &asset.room {
            if !room_ids.contains(room.as_str()) {
                issues.push(Issue::error(
                    &asset.id,
                    format!("unknown server room `{room}`"),
                ));
            }
        }
        if !asset.is_present_in(year) {
            issues.push(Issue::warning(
                &asset.id,
                format!("not in the fleet during {year}; ignored"),
            ));
            continue;
        }
        let age = year - asset.acquisition_year;
        if age > options.age_warning_years {
            issues.push(Issue::warning(&asset.id, format!("asset age {age} years")));
        }
        if asset.status == AssetStatus::InUse
            && asset.measured_power_w.is_none()
            && asset.category.scope_mask().contains(Scope::S2)
            && db
                .lookup(asset.category)
                .is_ok_and(|f| f.typical_power_w == 0.0)
        {
            issues.push(Issue::warning(
                &asset.id,
                "typical power is 0 W and no measured power is given",
            ));
        }
    }

    for room in &fleet.rooms {
        let numbers_ok = room.refrigerant_leak_kg_per_year.is_finite()
            && room.refrigerant_leak_kg_per_year >= 0.0
            && (0.0..=1.0).contains(&room.ups_overhead_fraction)
            && room
                .measured_room_kwh_per_year
                .is_none_or(|v| v.is_finite() && v >= 0.0);
        if !numbers_ok {
            issues.push(Issue::error(&room.id, "numeric field out of range"));
        }
        if room.refrigerant_leak_kg_per_year > 0.0 {
            match &room.refrigerant_fluid {
                None => issues.push(Issue::error(
                    &room.id,
                    "refrigerant leak declared without a fluid",
                )),
                Some(fluid) if db.gwp(fluid).is_err() => issues.push(Issue::error(
                    &room.id,
                    format!("refrigerant fluid `{fluid}` is not in the GWP table"),
                )),
                Some(_) => {}
            }
        }
    }

    for c in &fleet.campaigns {
        if !c.is_complete() {
            issues.push(Issue::error(
                &c.id,
                "campaign needs kwh, or core_hours and watts_per_core",
            ));
        }
        let numbers_ok = [c.kwh, c.core_hours, c.watts_per_core]
            .into_iter()
            .flatten()
            .all(|v| v.is_finite() && v >= 0.0)
            && c.pue.is_finite()
            && c.pue >= 1.0;
        if !numbers_ok {
            issues.push(Issue::error(&c.id, "numeric field out of range"));
        }
    }

    for e in &fleet.external_services {
        if !e.declared_kgco2e.is_finite() || e.declared_kgco2e < 0.0 {
            issues.push(Issue::error(
                &e.id,
                "declared value must be finite and non-negative",
            ));
        }
        if e.scope_label == Scope::S1 {
            issues.push(Issue::error(
                &e.id,
                "external entries report under S2 or S3",
            ));
        }
    }

    for c in &fleet.cable_bulks {
        if !matches!(
            c.category,
            EquipmentCategory::CableCat5 | EquipmentCategory::CableHdmi
        ) {
            issues.push(Issue::error(
                &c.id,
                format!("{} is not a cable category", c.category),
            ));
        }
    }
    issues
}
