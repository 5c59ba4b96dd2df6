//! Annual greenhouse-gas assessment of an IT fleet.
//!
//! The crate is organised bottom-up:
//!
//! - [`factors`]: the emission-factor reference database, its file format,
//!   and source reliability ranking.
//! - [`inventory`]: the declared perimeter (fleet), fleet CSV and GLPI
//!   export parsing, validation.
//! - [`engine`]: scope 1/2/3 emission lines for one reporting year and
//!   uncertainty propagation.
//! - [`report`]: aggregation, year-over-year comparison, what-if scenarios
//!   and rendering.
//!
//! ```
//! use ecodiag::{compute_fleet, load_factor_db, parse_fleet_csv, samples, aggregate, EngineConfig};
//!
//! let db = load_factor_db(samples::FACTORS).unwrap().merge();
//! let fleet = parse_fleet_csv(samples::FLEET, 2019, "GATE, Lyon").unwrap();
//! let lines = compute_fleet(&fleet, &db, &EngineConfig::for_database(&db)).unwrap();
//! let report = aggregate(&lines, &fleet);
//! assert!(report.grand_total_kgco2e > 0.0);
//! ```

pub mod engine;
pub mod error;
pub mod factors;
pub mod inventory;
pub mod report;
pub mod samples;

pub use engine::{
    aggregate_uncertainty, compute_fleet, usage_hours, EmissionLine, EngineConfig, GridFactor,
    Phase,
};
pub use error::{
    EngineError, FactorFileError, FactorFileErrorKind, InventoryError, LookupError, ReportError,
    Severity,
};
pub use factors::{
    load_factor_db, lookup_factor, merge_factors, reliability_rank, render_factor_file,
    CategoryGroup, EmissionFactor, EquipmentCategory, FactorDatabase, GwpEntry, HourProfile, Scope,
    SourceKind, SourceMeta, DEFAULT_GRID_FACTOR,
};
pub use inventory::{
    parse_fleet_csv, parse_glpi_export, parse_rules, render_fleet_csv, validate_fleet, Asset,
    AssetStatus, CableBulk, ComputeCampaign, ExternalServiceEntry, Fleet, Issue, MappingRule,
    ServerRoom, UnmappedRecord,
};
pub use report::{
    aggregate, apply_scenario, compare_years, evaluate_scenario, parse_actions, render, Format,
    Render, Report, ScenarioAction, ScenarioResult, YearComparison,
};
