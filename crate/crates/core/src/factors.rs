//! Emission-factor reference data.
//!
//! The category taxonomy is closed: every inventory line maps onto one of the
//! [`EquipmentCategory`] variants, and each category carries a fixed scope mask
//! and default usage-hour profile. Factor values themselves are input data,
//! loaded from a factor file and never hard-coded.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{FactorFileError, FactorFileErrorKind, LookupError};

/// Grid emission factor for metropolitan France, kgCO₂e per kWh.
pub const DEFAULT_GRID_FACTOR: f64 = 0.119;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scope {
    S1,
    S2,
    S3,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::S1, Scope::S2, Scope::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::S1 => "S1",
            Scope::S2 => "S2",
            Scope::S3 => "S3",
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S1" => Ok(Scope::S1),
            "S2" => Ok(Scope::S2),
            "S3" => Ok(Scope::S3),
            other => Err(format!("unknown scope `{other}`")),
        }
    }
}

/// Set of scopes a category may report under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ScopeMask(u8);

impl ScopeMask {
    pub const fn of(scopes: &[Scope]) -> Self {
        let mut bits = 0u8;
        let mut i = 0;
        while i < scopes.len() {
            bits |= 1 << scopes[i] as u8;
            i += 1;
        }
        ScopeMask(bits)
    }

    pub fn contains(self, scope: Scope) -> bool {
        self.0 & (1 << scope as u8) != 0
    }

    pub fn iter(self) -> impl Iterator<Item = Scope> {
        Scope::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoryGroup {
    Office,
    Telephony,
    ServerRoom,
    Shared,
    Compute,
    Bulk,
}

impl CategoryGroup {
    pub const ALL: [CategoryGroup; 6] = [
        CategoryGroup::Office,
        CategoryGroup::Telephony,
        CategoryGroup::ServerRoom,
        CategoryGroup::Shared,
        CategoryGroup::Compute,
        CategoryGroup::Bulk,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CategoryGroup::Office => "office",
            CategoryGroup::Telephony => "telephony",
            CategoryGroup::ServerRoom => "server_room",
            CategoryGroup::Shared => "shared",
            CategoryGroup::Compute => "compute",
            CategoryGroup::Bulk => "bulk",
        }
    }
}

impl fmt::Display for CategoryGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Yearly operating-hour profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HourProfile {
    /// Full-time working year.
    WorkYear,
    /// Powered around the clock.
    Continuous,
    /// No usage phase (bulk items, compute campaigns).
    NotApplicable,
}

impl HourProfile {
    pub fn as_str(self) -> &'static str {
        match self {
            HourProfile::WorkYear => "work_year",
            HourProfile::Continuous => "continuous",
            HourProfile::NotApplicable => "none",
        }
    }
}

impl FromStr for HourProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "work_year" => Ok(HourProfile::WorkYear),
            "continuous" => Ok(HourProfile::Continuous),
            "none" => Ok(HourProfile::NotApplicable),
            other => Err(format!("unknown hour profile `{other}`")),
        }
    }
}

macro_rules! categories {
    ($( $variant:ident => $id:literal, $group:ident, [$($scope:ident),*], $profile:ident; )*) => {
        /// Closed equipment taxonomy.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum EquipmentCategory {
            $($variant,)*
        }

        impl EquipmentCategory {
            pub const ALL: &'static [EquipmentCategory] = &[$(EquipmentCategory::$variant,)*];

            pub fn id(self) -> &'static str {
                match self {
                    $(EquipmentCategory::$variant => $id,)*
                }
            }

            pub fn group(self) -> CategoryGroup {
                match self {
                    $(EquipmentCategory::$variant => CategoryGroup::$group,)*
                }
            }

            pub fn scope_mask(self) -> ScopeMask {
                match self {
                    $(EquipmentCategory::$variant => ScopeMask::of(&[$(Scope::$scope),*]),)*
                }
            }

            pub fn default_hour_profile(self) -> HourProfile {
                match self {
                    $(EquipmentCategory::$variant => HourProfile::$profile,)*
                }
            }
        }

        impl FromStr for EquipmentCategory {
            type Err = UnknownCategory;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($id => Ok(EquipmentCategory::$variant),)*
                    other => Err(UnknownCategory(other.to_string())),
                }
            }
        }
    };
}

categories! {
    Desktop => "desktop", Office, [S2, S3], WorkYear;
    Laptop => "laptop", Office, [S2, S3], WorkYear;
    Tablet => "tablet", Office, [S2, S3], WorkYear;
    Screen => "screen", Office, [S2, S3], WorkYear;
    Keyboard => "keyboard", Office, [S2, S3], WorkYear;
    Mouse => "mouse", Office, [S2, S3], WorkYear;
    OfficePrinter => "office_printer", Office, [S2, S3], WorkYear;
    UsbKey => "usb_key", Office, [S2, S3], WorkYear;
    ExternalHdd => "external_hdd", Office, [S2, S3], WorkYear;
    IpPhone => "ip_phone", Telephony, [S2, S3], Continuous;
    MobilePhone => "mobile_phone", Telephony, [S2, S3], WorkYear;
    Server => "server", ServerRoom, [S2, S3], Continuous;
    Workstation24x7 => "workstation_24x7", ServerRoom, [S2, S3], Continuous;
    NetworkSwitch => "network_switch", ServerRoom, [S2, S3], Continuous;
    Router => "router", ServerRoom, [S2, S3], Continuous;
    StorageArray => "storage_array", ServerRoom, [S2, S3], Continuous;
    Ups => "ups", ServerRoom, [S2], Continuous;
    AirConditioner => "air_conditioner", ServerRoom, [S1, S2], Continuous;
    Videoprojector => "videoprojector", Shared, [S2, S3], WorkYear;
    VisioSystem => "visio_system", Shared, [S2, S3], WorkYear;
    WifiAp => "wifi_ap", Shared, [S2, S3], Continuous;
    MultifunctionCopier => "multifunction_copier", Shared, [S2, S3], WorkYear;
    ComputeCampaign => "compute_campaign", Compute, [S2], NotApplicable;
    CableCat5 => "cable_cat5", Bulk, [S3], NotApplicable;
    CableHdmi => "cable_hdmi", Bulk, [S3], NotApplicable;
}

impl EquipmentCategory {
    /// Categories that can appear as individual inventory assets.
    pub fn is_asset_category(self) -> bool {
        !matches!(self.group(), CategoryGroup::Bulk | CategoryGroup::Compute)
    }
}

impl fmt::Display for EquipmentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownCategory(pub String);

impl fmt::Display for UnknownCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown category `{}`", self.0)
    }
}

impl std::error::Error for UnknownCategory {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    PublicBase,
    VendorFiche,
    PeerReviewed,
    InternalMeasure,
}

impl SourceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::PublicBase => "public_base",
            SourceKind::VendorFiche => "vendor_fiche",
            SourceKind::PeerReviewed => "peer_reviewed",
            SourceKind::InternalMeasure => "internal_measure",
        }
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "public_base" => Ok(SourceKind::PublicBase),
            "vendor_fiche" => Ok(SourceKind::VendorFiche),
            "peer_reviewed" => Ok(SourceKind::PeerReviewed),
            "internal_measure" => Ok(SourceKind::InternalMeasure),
            other => Err(format!("unknown source kind `{other}`")),
        }
    }
}

/// Where a factor comes from, and how much we trust it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceMeta {
    pub name: String,
    pub year: i32,
    pub kind: SourceKind,
    pub commissioner_neutral: bool,
    pub peer_reviewed: bool,
}

/// Reliability score of a source: peer review weighs 4, a neutral
/// commissioner 2, an internal measurement 1.
pub fn reliability_rank(source: &SourceMeta) -> u32 {
    4 * u32::from(source.peer_reviewed)
        + 2 * u32::from(source.commissioner_neutral)
        + u32::from(source.kind == SourceKind::InternalMeasure)
}

/// Total order on sources; `Greater` means more reliable.
///
/// Rank first, then the more recent year, then the lexicographically smaller
/// name. Remaining fields only separate sources that agree on all three.
pub fn reliability_cmp(a: &SourceMeta, b: &SourceMeta) -> Ordering {
    reliability_rank(a)
        .cmp(&reliability_rank(b))
        .then(a.year.cmp(&b.year))
        .then_with(|| b.name.cmp(&a.name))
        .then(b.kind.cmp(&a.kind))
        .then(a.commissioner_neutral.cmp(&b.commissioner_neutral))
        .then(a.peer_reviewed.cmp(&b.peer_reviewed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionFactor {
    pub category: EquipmentCategory,
    pub fab_transport_kgco2e: f64,
    pub eol_kgco2e: f64,
    pub typical_power_w: f64,
    pub rel_uncertainty: f64,
    pub source: SourceMeta,
}

impl EmissionFactor {
    /// Identity of the factor row, used to group correlated uncertainties.
    pub fn key(&self) -> String {
        format!("{}/{}", self.source.name, self.category)
    }
}

fn factor_cmp(a: &EmissionFactor, b: &EmissionFactor) -> Ordering {
    reliability_cmp(&a.source, &b.source)
        .then(b.fab_transport_kgco2e.total_cmp(&a.fab_transport_kgco2e))
        .then(b.eol_kgco2e.total_cmp(&a.eol_kgco2e))
        .then(b.typical_power_w.total_cmp(&a.typical_power_w))
        .then(b.rel_uncertainty.total_cmp(&a.rel_uncertainty))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GwpEntry {
    pub fluid: String,
    pub gwp_kgco2e_per_kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorDatabase {
    pub factors: Vec<EmissionFactor>,
    pub gwp_table: Vec<GwpEntry>,
    pub default_grid_factor_kgco2e_per_kwh: f64,
}

impl Default for FactorDatabase {
    fn default() -> Self {
        FactorDatabase {
            factors: Vec::new(),
            gwp_table: Vec::new(),
            default_grid_factor_kgco2e_per_kwh: DEFAULT_GRID_FACTOR,
        }
    }
}

impl FactorDatabase {
    /// Keeps the single most reliable factor per category, ordered by category.
    pub fn merge(&self) -> FactorDatabase {
        let mut best: BTreeMap<EquipmentCategory, &EmissionFactor> = BTreeMap::new();
        for factor in &self.factors {
            best.entry(factor.category)
                .and_modify(|current| {
                    if factor_cmp(factor, current) == Ordering::Greater {
                        *current = factor;
                    }
                })
                .or_insert(factor);
        }
        FactorDatabase {
            factors: best.into_values().cloned().collect(),
            gwp_table: self.gwp_table.clone(),
            default_grid_factor_kgco2e_per_kwh: self.default_grid_factor_kgco2e_per_kwh,
        }
    }

    /// The factor for `category`. On an unmerged database this is the entry
    /// [`merge`](Self::merge) would keep.
    pub fn lookup(&self, category: EquipmentCategory) -> Result<&EmissionFactor, LookupError> {
        self.factors
            .iter()
            .filter(|f| f.category == category)
            .max_by(|a, b| factor_cmp(a, b))
            .ok_or(LookupError::MissingFactor(category))
    }

    pub fn gwp(&self, fluid: &str) -> Result<f64, LookupError> {
        self.gwp_table
            .iter()
            .find(|g| g.fluid == fluid)
            .map(|g| g.gwp_kgco2e_per_kg)
            .ok_or_else(|| LookupError::UnknownFluid(fluid.to_string()))
    }
}

pub fn merge_factors(db: &FactorDatabase) -> FactorDatabase {
    db.merge()
}

pub fn lookup_factor(
    db: &FactorDatabase,
    category: EquipmentCategory,
) -> Result<&EmissionFactor, LookupError> {
    db.lookup(category)
}

/// SHA-256 of a factor file's bytes, hex encoded.
pub fn content_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Factors,
    Gwp,
    Grid,
}

struct Row<'a> {
    line: usize,
    fields: Vec<(usize, &'a str)>,
}

impl<'a> Row<'a> {
    fn split(line: usize, text: &'a str) -> Self {
        let mut fields = Vec::new();
        let mut column = 1;
        for raw in text.split(',') {
            let lead = raw.len() - raw.trim_start().len();
            fields.push((column + raw[..lead].chars().count(), raw.trim()));
            column += raw.chars().count() + 1;
        }
        Row { line, fields }
    }

    fn err(&self, idx: usize, kind: FactorFileErrorKind) -> FactorFileError {
        let column = self.fields.get(idx).map_or(1, |(c, _)| *c);
        FactorFileError {
            line: self.line,
            column,
            kind,
        }
    }

    fn expect_len(&self, n: usize) -> Result<(), FactorFileError> {
        if self.fields.len() == n {
            Ok(())
        } else {
            Err(self.err(
                self.fields.len().min(n),
                FactorFileErrorKind::Syntax(format!(
                    "expected {n} fields, found {}",
                    self.fields.len()
                )),
            ))
        }
    }

    fn number(&self, idx: usize, field: &'static str) -> Result<f64, FactorFileError> {
        let raw = self.fields[idx].1;
        let value: f64 = raw.parse().map_err(|_| {
            self.err(
                idx,
                FactorFileErrorKind::Syntax(format!("`{raw}` is not a number")),
            )
        })?;
        if !value.is_finite() {
            return Err(self.err(
                idx,
                FactorFileErrorKind::InvalidValue {
                    field,
                    reason: "not finite".into(),
                },
            ));
        }
        if value < 0.0 {
            return Err(self.err(idx, FactorFileErrorKind::NegativeValue(field)));
        }
        Ok(value)
    }

    fn boolean(&self, idx: usize, field: &'static str) -> Result<bool, FactorFileError> {
        match self.fields[idx].1 {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(self.err(
                idx,
                FactorFileErrorKind::InvalidValue {
                    field,
                    reason: format!("expected true|false, found `{other}`"),
                },
            )),
        }
    }
}

/// Parses a factor file (`[factors]`, `[gwp]` and `[grid]` sections).
///
/// A file without a `[grid]` row gets [`DEFAULT_GRID_FACTOR`].
pub fn load_factor_db(text: &str) -> Result<FactorDatabase, FactorFileError> {
    let mut db = FactorDatabase::default();
    let mut section = Section::None;
    let mut fluids = HashSet::new();
    let mut grid_seen = false;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = raw_line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if trimmed.starts_with('[') {
            section = match trimmed {
                "[factors]" => Section::Factors,
                "[gwp]" => Section::Gwp,
                "[grid]" => Section::Grid,
                other => {
                    return Err(FactorFileError {
                        line: line_no,
                        column: 1,
                        kind: FactorFileErrorKind::Syntax(format!("unknown section `{other}`")),
                    })
                }
            };
            continue;
        }
        let row = Row::split(line_no, raw_line);
        match section {
            Section::None => {
                return Err(row.err(
                    0,
                    FactorFileErrorKind::Syntax("row outside of any section".into()),
                ))
            }
            Section::Factors => db.factors.push(parse_factor_row(&row)?),
            Section::Gwp => {
                row.expect_len(2)?;
                let fluid = row.fields[0].1;
                if fluid.is_empty() {
                    return Err(row.err(0, FactorFileErrorKind::Syntax("empty fluid name".into())));
                }
                let gwp = row.number(1, "gwp_kgco2e_per_kg")?;
                if gwp <= 0.0 {
                    return Err(row.err(
                        1,
                        FactorFileErrorKind::InvalidValue {
                            field: "gwp_kgco2e_per_kg",
                            reason: "must be positive".into(),
                        },
                    ));
                }
                if !fluids.insert(fluid.to_string()) {
                    return Err(row.err(0, FactorFileErrorKind::DuplicateFluid(fluid.to_string())));
                }
                db.gwp_table.push(GwpEntry {
                    fluid: fluid.to_string(),
                    gwp_kgco2e_per_kg: gwp,
                });
            }
            Section::Grid => {
                row.expect_len(2)?;
                if row.fields[0].1 != "grid_factor_kgco2e_per_kwh" {
                    return Err(row.err(
                        0,
                        FactorFileErrorKind::Syntax(format!(
                            "expected `grid_factor_kgco2e_per_kwh`, found `{}`",
                            row.fields[0].1
                        )),
                    ));
                }
                if grid_seen {
                    return Err(row.err(0, FactorFileErrorKind::DuplicateGrid));
                }
                let grid = row.number(1, "grid_factor_kgco2e_per_kwh")?;
                if grid <= 0.0 {
                    return Err(row.err(
                        1,
                        FactorFileErrorKind::InvalidValue {
                            field: "grid_factor_kgco2e_per_kwh",
                            reason: "must be positive".into(),
                        },
                    ));
                }
                grid_seen = true;
                db.default_grid_factor_kgco2e_per_kwh = grid;
            }
        }
    }
    Ok(db)
}

fn parse_factor_row(row: &Row<'_>) -> Result<EmissionFactor, FactorFileError> {
    row.expect_len(10)?;
    let category: EquipmentCategory = row.fields[0]
        .1
        .parse()
        .map_err(|e: UnknownCategory| row.err(0, FactorFileErrorKind::UnknownCategory(e.0)))?;
    let rel_uncertainty = row.number(4, "rel_uncertainty")?;
    if rel_uncertainty > 1.0 {
        return Err(row.err(
            4,
            FactorFileErrorKind::InvalidValue {
                field: "rel_uncertainty",
                reason: "must lie in [0, 1]".into(),
            },
        ));
    }
    let name = row.fields[5].1;
    if name.is_empty() {
        return Err(row.err(
            5,
            FactorFileErrorKind::InvalidValue {
                field: "source_name",
                reason: "must not be empty".into(),
            },
        ));
    }
    let year: i32 = row.fields[6].1.parse().map_err(|_| {
        row.err(
            6,
            FactorFileErrorKind::Syntax(format!("`{}` is not a year", row.fields[6].1)),
        )
    })?;
    if year < 1990 {
        return Err(row.err(
            6,
            FactorFileErrorKind::InvalidValue {
                field: "source_year",
                reason: format!("{year} is before 1990"),
            },
        ));
    }
    let kind: SourceKind = row.fields[7].1.parse().map_err(|reason| {
        row.err(
            7,
            FactorFileErrorKind::InvalidValue {
                field: "source_kind",
                reason,
            },
        )
    })?;
    Ok(EmissionFactor {
        category,
        fab_transport_kgco2e: row.number(1, "fab_transport_kgco2e")?,
        eol_kgco2e: row.number(2, "eol_kgco2e")?,
        typical_power_w: row.number(3, "typical_power_w")?,
        rel_uncertainty,
        source: SourceMeta {
            name: name.to_string(),
            year,
            kind,
            commissioner_neutral: row.boolean(8, "commissioner_neutral")?,
            peer_reviewed: row.boolean(9, "peer_reviewed")?,
        },
    })
}

/// Renders a database in the factor-file format accepted by [`load_factor_db`].
pub fn render_factor_file(db: &FactorDatabase) -> String {
    let mut out = String::from(
        "# category,fab_transport_kgco2e,eol_kgco2e,typical_power_w,rel_uncertainty,\
         source_name,source_year,source_kind,commissioner_neutral,peer_reviewed\n[factors]\n",
    );
    for f in &db.factors {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            f.category,
            f.fab_transport_kgco2e,
            f.eol_kgco2e,
            f.typical_power_w,
            f.rel_uncertainty,
            f.source.name,
            f.source.year,
            f.source.kind.as_str(),
            f.source.commissioner_neutral,
            f.source.peer_reviewed
        ));
    }
    out.push_str("\n[gwp]\n");
    for g in &db.gwp_table {
        out.push_str(&format!("{},{}\n", g.fluid, g.gwp_kgco2e_per_kg));
    }
    out.push_str(&format!(
        "\n[grid]\ngrid_factor_kgco2e_per_kwh,{}\n",
        db.default_grid_factor_kgco2e_per_kwh
    ));
    out
}
