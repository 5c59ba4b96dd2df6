use std::fmt;

use thiserror::Error;

use crate::factors::EquipmentCategory;

/// A factor-file problem, located at a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("factor file line {line}, column {column}: {kind}")]
pub struct FactorFileError {
    pub line: usize,
    pub column: usize,
    pub kind: FactorFileErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FactorFileErrorKind {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown category `{0}`")]
    UnknownCategory(String),
    #[error("negative value in `{0}`")]
    NegativeValue(&'static str),
    #[error("invalid value in `{field}`: {reason}")]
    InvalidValue { field: &'static str, reason: String },
    #[error("duplicate GWP fluid `{0}`")]
    DuplicateFluid(String),
    #[error("grid factor declared more than once")]
    DuplicateGrid,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("missing factor: {0}")]
    MissingFactor(EquipmentCategory),
    #[error("unknown refrigerant fluid `{0}`")]
    UnknownFluid(String),
}

/// Fleet CSV, GLPI export and mapping-rule parse failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum InventoryError {
    #[error("row {row}: syntax error: {message}")]
    Syntax { row: usize, message: String },
    #[error("row {row}: invalid `{field}`: {message}")]
    Invalid {
        row: usize,
        field: &'static str,
        message: String,
    },
    #[error("duplicate {list} id `{id}`")]
    DuplicateId { list: &'static str, id: String },
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("perimeter description must not be empty")]
    EmptyPerimeter,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Lookup(#[from] LookupError),
    #[error("server room `{0}` leaks refrigerant but declares no fluid")]
    MissingFluid(String),
    #[error("compute campaign `{0}` needs either kwh or core_hours and watts_per_core")]
    IncompleteCampaign(String),
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReportError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("year comparison needs at least two reports, got {0}")]
    TooFewReports(usize),
    #[error("reporting year {0} appears more than once")]
    DuplicateYear(i32),
    #[error("scenario target `{0}` does not exist in the fleet")]
    UnknownTarget(String),
    #[error("scenario adds asset `{0}` whose id is already taken")]
    IdTaken(String),
    #[error("invalid report JSON: {0}")]
    Json(String),
    #[error("actions file row {row}: {message}")]
    Actions { row: usize, message: String },
}

/// Severity of a validation [`Issue`](crate::inventory::Issue).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        })
    }
}
