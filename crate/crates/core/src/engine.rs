//! Emission lines for one reporting year.
//!
//! Every asset, room, campaign, cable bulk and external entry is turned into
//! zero or more [`EmissionLine`]s. Usage (scope 2) follows fixed hour
//! profiles; fabrication (scope 3) is charged only in the acquisition year and
//! end-of-life only in the disposal year. Measured power beats typical power,
//! and whole-room metering beats both.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{EngineError, LookupError};
use crate::factors::{
    CategoryGroup, EmissionFactor, EquipmentCategory, FactorDatabase, GwpEntry, HourProfile, Scope,
    DEFAULT_GRID_FACTOR,
};
use crate::inventory::{
    Asset, AssetStatus, CableBulk, ComputeCampaign, ExternalServiceEntry, Fleet, ServerRoom,
};

/// Full-time working hours per year.
pub const WORK_YEAR_HOURS: f64 = 1607.0;
/// 24 h × 365 d.
pub const CONTINUOUS_HOURS: f64 = 8760.0;
const LEAP_YEAR_HOURS: f64 = 8784.0;

pub const SOURCE_MEASURED: &str = "measured";
pub const SOURCE_VENDOR: &str = "vendor";
pub const SOURCE_DECLARED: &str = "declared";

#[derive(Debug, Clone, PartialEq)]
pub struct GridFactor {
    pub kgco2e_per_kwh: f64,
    pub source_note: String,
}

impl GridFactor {
    pub fn new(kgco2e_per_kwh: f64, source_note: impl Into<String>) -> Result<Self, EngineError> {
        if !kgco2e_per_kwh.is_finite() || kgco2e_per_kwh <= 0.0 {
            return Err(EngineError::Config(format!(
                "grid factor must be finite and positive, got {kgco2e_per_kwh}"
            )));
        }
        Ok(GridFactor {
            kgco2e_per_kwh,
            source_note: source_note.into(),
        })
    }
}

impl Default for GridFactor {
    fn default() -> Self {
        GridFactor {
            kgco2e_per_kwh: DEFAULT_GRID_FACTOR,
            source_note: "France, EcoInvent".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub grid: GridFactor,
    pub work_year_hours: f64,
    pub continuous_hours: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            grid: GridFactor::default(),
            work_year_hours: WORK_YEAR_HOURS,
            continuous_hours: CONTINUOUS_HOURS,
        }
    }
}

impl EngineConfig {
    pub fn new(
        grid: GridFactor,
        work_year_hours: f64,
        continuous_hours: f64,
    ) -> Result<Self, EngineError> {
        if !(work_year_hours > 0.0
            && work_year_hours <= continuous_hours
            && continuous_hours <= LEAP_YEAR_HOURS)
        {
            return Err(EngineError::Config(format!(
                "need 0 < work_year_hours ({work_year_hours}) <= continuous_hours \
                 ({continuous_hours}) <= {LEAP_YEAR_HOURS}"
            )));
        }
        Ok(EngineConfig {
            grid,
            work_year_hours,
            continuous_hours,
        })
    }

    /// Default hours with the database's grid factor.
    pub fn for_database(db: &FactorDatabase) -> Self {
        EngineConfig {
            grid: GridFactor {
                kgco2e_per_kwh: db.default_grid_factor_kgco2e_per_kwh,
                source_note: "factor file".into(),
            },
            ..EngineConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    FabricationTransport,
    Usage,
    EndOfLife,
    Fugitive,
    Declared,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::FabricationTransport => "fabrication_transport",
            Phase::Usage => "usage",
            Phase::EndOfLife => "end_of_life",
            Phase::Fugitive => "fugitive",
            Phase::Declared => "declared",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmissionLine {
    pub subject_id: String,
    /// Category whose scope mask governs the line; `None` for whole-room
    /// metering and external entries.
    pub category: Option<EquipmentCategory>,
    /// Reporting group; `None` for external entries.
    pub group: Option<CategoryGroup>,
    pub scope: Scope,
    pub phase: Phase,
    pub kgco2e: f64,
    pub abs_uncertainty_kgco2e: f64,
    /// Uncertainties sharing this key are fully correlated.
    pub factor_source: String,
}

impl EmissionLine {
    pub fn scope_permitted(&self) -> bool {
        self.category
            .is_none_or(|c| c.scope_mask().contains(self.scope))
    }
}

fn line_order(a: &EmissionLine, b: &EmissionLine) -> Ordering {
    a.subject_id
        .cmp(&b.subject_id)
        .then(a.scope.cmp(&b.scope))
        .then(a.phase.cmp(&b.phase))
        .then(a.group.cmp(&b.group))
        .then(a.category.cmp(&b.category))
        .then(a.kgco2e.total_cmp(&b.kgco2e))
        .then(
            a.abs_uncertainty_kgco2e
                .total_cmp(&b.abs_uncertainty_kgco2e),
        )
        .then(a.factor_source.cmp(&b.factor_source))
}

/// Sorts lines by subject, scope, phase (remaining fields break ties).
pub fn sort_lines(lines: &mut [EmissionLine]) {
    lines.sort_by(line_order);
}

/// Order-independent sum: values are sorted before adding.
pub fn stable_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().fold(0.0, |acc, x| acc + x)
}

pub fn usage_hours(asset: &Asset, config: &EngineConfig) -> f64 {
    if asset.status == AssetStatus::Stored {
        return 0.0;
    }
    match asset
        .hour_profile_override
        .unwrap_or_else(|| asset.category.default_hour_profile())
    {
        HourProfile::WorkYear => config.work_year_hours,
        HourProfile::Continuous => config.continuous_hours,
        HourProfile::NotApplicable => 0.0,
    }
}

/// Yearly electricity draw of an asset and whether it comes from a measurement.
fn usage_kwh(asset: &Asset, factor: &EmissionFactor, config: &EngineConfig) -> (f64, bool) {
    let (power, measured) = match asset.measured_power_w {
        Some(p) => (p, true),
        None => (factor.typical_power_w, false),
    };
    (
        f64::from(asset.quantity) * power * usage_hours(asset, config) / 1000.0,
        measured,
    )
}

pub fn scope2_usage(
    asset: &Asset,
    factor: &EmissionFactor,
    config: &EngineConfig,
) -> Option<EmissionLine> {
    if !asset.category.scope_mask().contains(Scope::S2) {
        return None;
    }
    let (kwh, measured) = usage_kwh(asset, factor, config);
    if kwh == 0.0 {
        return None;
    }
    let kgco2e = kwh * config.grid.kgco2e_per_kwh;
    let (abs_uncertainty_kgco2e, factor_source) = if measured {
        (0.0, SOURCE_MEASURED.to_string())
    } else {
        (kgco2e * factor.rel_uncertainty, factor.key())
    };
    Some(EmissionLine {
        subject_id: asset.id.clone(),
        category: Some(asset.category),
        group: Some(asset.category.group()),
        scope: Scope::S2,
        phase: Phase::Usage,
        kgco2e,
        abs_uncertainty_kgco2e,
        factor_source,
    })
}

pub fn scope3_fabrication(
    asset: &Asset,
    factor: &EmissionFactor,
    reporting_year: i32,
) -> Option<EmissionLine> {
    if !asset.category.scope_mask().contains(Scope::S3) || asset.acquisition_year != reporting_year
    {
        return None;
    }
    let quantity = f64::from(asset.quantity);
    let (kgco2e, abs_uncertainty_kgco2e, factor_source) = match asset.vendor_fab_transport_kgco2e {
        Some(v) => (quantity * v, 0.0, SOURCE_VENDOR.to_string()),
        None => {
            let v = quantity * factor.fab_transport_kgco2e;
            (v, v * factor.rel_uncertainty, factor.key())
        }
    };
    Some(EmissionLine {
        subject_id: asset.id.clone(),
        category: Some(asset.category),
        group: Some(asset.category.group()),
        scope: Scope::S3,
        phase: Phase::FabricationTransport,
        kgco2e,
        abs_uncertainty_kgco2e,
        factor_source,
    })
}

pub fn scope3_eol(
    asset: &Asset,
    factor: &EmissionFactor,
    reporting_year: i32,
) -> Option<EmissionLine> {
    if !asset.category.scope_mask().contains(Scope::S3)
        || asset.disposal_year != Some(reporting_year)
    {
        return None;
    }
    let kgco2e = f64::from(asset.quantity) * factor.eol_kgco2e;
    Some(EmissionLine {
        subject_id: asset.id.clone(),
        category: Some(asset.category),
        group: Some(asset.category.group()),
        scope: Scope::S3,
        phase: Phase::EndOfLife,
        kgco2e,
        abs_uncertainty_kgco2e: kgco2e * factor.rel_uncertainty,
        factor_source: factor.key(),
    })
}

pub fn scope1_refrigerant(
    room: &ServerRoom,
    gwp_table: &[GwpEntry],
) -> Result<Option<EmissionLine>, EngineError> {
    let leak = room.refrigerant_leak_kg_per_year;
    if leak <= 0.0 {
        return Ok(None);
    }
    let fluid = room
        .refrigerant_fluid
        .as_deref()
        .ok_or_else(|| EngineError::MissingFluid(room.id.clone()))?;
    let gwp = gwp_table
        .iter()
        .find(|g| g.fluid == fluid)
        .ok_or_else(|| LookupError::UnknownFluid(fluid.to_string()))?
        .gwp_kgco2e_per_kg;
    Ok(Some(EmissionLine {
        subject_id: room.id.clone(),
        category: Some(EquipmentCategory::AirConditioner),
        group: Some(CategoryGroup::ServerRoom),
        scope: Scope::S1,
        phase: Phase::Fugitive,
        kgco2e: leak * gwp,
        abs_uncertainty_kgco2e: 0.0,
        factor_source: format!("gwp/{fluid}"),
    }))
}

/// Room-level scope 2: either the metered consumption of the whole room, or
/// the UPS overhead on the room's assets.
///
/// Per-asset lines of a metered room must be dropped by the caller;
/// [`compute_fleet`] does so.
pub fn scope2_room_overheads(
    room: &ServerRoom,
    fleet: &Fleet,
    db: &FactorDatabase,
    config: &EngineConfig,
) -> Result<Vec<EmissionLine>, EngineError> {
    let grid = config.grid.kgco2e_per_kwh;
    if let Some(kwh) = room.measured_room_kwh_per_year {
        return Ok(vec![EmissionLine {
            subject_id: room.id.clone(),
            category: None,
            group: Some(CategoryGroup::ServerRoom),
            scope: Scope::S2,
            phase: Phase::Usage,
            kgco2e: kwh * grid,
            abs_uncertainty_kgco2e: 0.0,
            factor_source: SOURCE_MEASURED.to_string(),
        }]);
    }
    if room.ups_overhead_fraction <= 0.0 {
        return Ok(Vec::new());
    }
    let mut kwh = Vec::new();
    let mut uncertainty = Vec::new();
    for asset in fleet
        .assets
        .iter()
        .filter(|a| a.room.as_deref() == Some(room.id.as_str()))
        .filter(|a| a.is_present_in(fleet.reporting_year))
    {
        let factor = db.lookup(asset.category)?;
        if let Some(line) = scope2_usage(asset, factor, config) {
            kwh.push(usage_kwh(asset, factor, config).0);
            uncertainty.push(line.abs_uncertainty_kgco2e);
        }
    }
    let overhead_kwh = room.ups_overhead_fraction * stable_sum(kwh);
    if overhead_kwh <= 0.0 {
        return Ok(Vec::new());
    }
    Ok(vec![EmissionLine {
        subject_id: room.id.clone(),
        category: Some(EquipmentCategory::Ups),
        group: Some(CategoryGroup::ServerRoom),
        scope: Scope::S2,
        phase: Phase::Usage,
        kgco2e: overhead_kwh * grid,
        abs_uncertainty_kgco2e: room.ups_overhead_fraction * stable_sum(uncertainty),
        factor_source: format!("{}/ups_overhead", room.id),
    }])
}

pub fn campaign_kwh(campaign: &ComputeCampaign) -> Result<f64, EngineError> {
    match (campaign.kwh, campaign.core_hours, campaign.watts_per_core) {
        (Some(kwh), _, _) => Ok(kwh),
        (None, Some(core_hours), Some(watts)) => Ok(core_hours * watts / 1000.0 * campaign.pue),
        _ => Err(EngineError::IncompleteCampaign(campaign.id.clone())),
    }
}

pub fn scope2_campaign(
    campaign: &ComputeCampaign,
    config: &EngineConfig,
) -> Result<EmissionLine, EngineError> {
    Ok(EmissionLine {
        subject_id: campaign.id.clone(),
        category: Some(EquipmentCategory::ComputeCampaign),
        group: Some(CategoryGroup::Compute),
        scope: Scope::S2,
        phase: Phase::Usage,
        kgco2e: campaign_kwh(campaign)? * config.grid.kgco2e_per_kwh,
        abs_uncertainty_kgco2e: 0.0,
        factor_source: SOURCE_DECLARED.to_string(),
    })
}

pub fn scope3_cables(
    bulk: &CableBulk,
    factor: &EmissionFactor,
    reporting_year: i32,
) -> Option<EmissionLine> {
    if bulk.count_acquired == 0 || bulk.acquisition_year != reporting_year {
        return None;
    }
    let kgco2e = f64::from(bulk.count_acquired) * factor.fab_transport_kgco2e;
    Some(EmissionLine {
        subject_id: bulk.id.clone(),
        category: Some(bulk.category),
        group: Some(CategoryGroup::Bulk),
        scope: Scope::S3,
        phase: Phase::FabricationTransport,
        kgco2e,
        abs_uncertainty_kgco2e: kgco2e * factor.rel_uncertainty,
        factor_source: factor.key(),
    })
}

pub fn declared_external(entry: &ExternalServiceEntry) -> EmissionLine {
    EmissionLine {
        subject_id: entry.id.clone(),
        category: None,
        group: None,
        scope: entry.scope_label,
        phase: Phase::Declared,
        kgco2e: entry.declared_kgco2e,
        abs_uncertainty_kgco2e: 0.0,
        factor_source: SOURCE_DECLARED.to_string(),
    }
}

/// All emission lines of the fleet for its reporting year, sorted.
pub fn compute_fleet(
    fleet: &Fleet,
    db: &FactorDatabase,
    config: &EngineConfig,
) -> Result<Vec<EmissionLine>, EngineError> {
    let year = fleet.reporting_year;
    let mut lines = Vec::new();

    for asset in &fleet.assets {
        let factor = db.lookup(asset.category)?;
        let metered = asset.room.as_deref().is_some_and(|id| {
            fleet
                .rooms
                .iter()
                .any(|r| r.id == id && r.measured_room_kwh_per_year.is_some())
        });
        if asset.is_present_in(year) && !metered {
            lines.extend(scope2_usage(asset, factor, config));
        }
        lines.extend(scope3_fabrication(asset, factor, year));
        lines.extend(scope3_eol(asset, factor, year));
    }
    for room in &fleet.rooms {
        lines.extend(scope1_refrigerant(room, &db.gwp_table)?);
        lines.extend(scope2_room_overheads(room, fleet, db, config)?);
    }
    for campaign in &fleet.campaigns {
        lines.push(scope2_campaign(campaign, config)?);
    }
    for bulk in &fleet.cable_bulks {
        lines.extend(scope3_cables(bulk, db.lookup(bulk.category)?, year));
    }
    lines.extend(fleet.external_services.iter().map(declared_external));

    sort_lines(&mut lines);
    Ok(lines)
}

/// Total and absolute uncertainty of a set of lines.
///
/// Lines sharing a `factor_source` have fully correlated errors and add
/// linearly; the per-source sums combine in quadrature.
pub fn aggregate_uncertainty(lines: &[EmissionLine]) -> (f64, f64) {
    let total = stable_sum(lines.iter().map(|l| l.kgco2e));
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for line in lines {
        groups
            .entry(line.factor_source.as_str())
            .or_default()
            .push(line.abs_uncertainty_kgco2e);
    }
    let variance = stable_sum(groups.into_values().map(|g| {
        let s = stable_sum(g);
        s * s
    }));
    (total, variance.sqrt())
}
