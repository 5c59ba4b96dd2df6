//! Annual reports, year-over-year comparison, what-if scenarios and their
//! rendering as JSON, CSV or Markdown.
//!
//! Totals are kept at full precision; only the CSV and Markdown renderings
//! round to 0.1 kgCO₂e. JSON carries exact values so it can be read back.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::{
    aggregate_uncertainty, compute_fleet, stable_sum, EmissionLine, EngineConfig, Phase,
};
use crate::error::ReportError;
use crate::factors::{reliability_rank, CategoryGroup, FactorDatabase, Scope};
use crate::inventory::{parse_asset_fields, Asset, Fleet};

pub const METHODOLOGY_NOTE: &str = "Annual CO2e estimate. Fabrication and transport are \
counted only for equipment acquired in the reporting year, end-of-life only for equipment \
disposed of that year. Office equipment runs 1607 h/yr, server-room and always-on equipment \
8760 h/yr. Results are orders of magnitude, not exact values.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            other => Err(format!("unknown format `{other}` (json|csv|markdown)")),
        }
    }
}

pub trait Render {
    fn render(&self, format: Format) -> String;
}

pub fn render<T: Render + ?Sized>(item: &T, format: Format) -> String {
    item.render(format)
}

/// One decimal, without a negative zero.
pub fn fmt1(value: f64) -> String {
    let s = format!("{value:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub reporting_year: i32,
    pub perimeter: String,
    pub totals_by_scope: BTreeMap<Scope, f64>,
    pub totals_by_group: BTreeMap<CategoryGroup, f64>,
    /// Declared external-service entries, outside any category group.
    pub external_total: f64,
    pub grand_total_kgco2e: f64,
    pub abs_uncertainty_kgco2e: f64,
    pub line_count: usize,
    /// `sha256:<hex>` of the factor file the report was computed with.
    pub factor_db_hash: String,
    pub generated_note: String,
}

impl Report {
    pub fn with_factor_db_hash(mut self, hash: &str) -> Self {
        self.factor_db_hash = format!("sha256:{hash}");
        self
    }

    pub fn from_json(text: &str) -> Result<Report, ReportError> {
        serde_json::from_str(text).map_err(|e| ReportError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn scope_total(&self, scope: Scope) -> f64 {
        self.totals_by_scope.get(&scope).copied().unwrap_or(0.0)
    }
}

/// Sums emission lines into a report for the fleet's year and perimeter.
pub fn aggregate(lines: &[EmissionLine], fleet: &Fleet) -> Report {
    let totals_by_scope = Scope::ALL
        .iter()
        .map(|&s| {
            (
                s,
                stable_sum(lines.iter().filter(|l| l.scope == s).map(|l| l.kgco2e)),
            )
        })
        .collect();
    let totals_by_group = CategoryGroup::ALL
        .iter()
        .map(|&g| {
            (
                g,
                stable_sum(
                    lines
                        .iter()
                        .filter(|l| l.group == Some(g))
                        .map(|l| l.kgco2e),
                ),
            )
        })
        .collect();
    let (grand_total, uncertainty) = aggregate_uncertainty(lines);
    Report {
        reporting_year: fleet.reporting_year,
        perimeter: fleet.perimeter_description.clone(),
        totals_by_scope,
        totals_by_group,
        external_total: stable_sum(lines.iter().filter(|l| l.group.is_none()).map(|l| l.kgco2e)),
        grand_total_kgco2e: grand_total,
        abs_uncertainty_kgco2e: uncertainty,
        line_count: lines.len(),
        factor_db_hash: String::new(),
        generated_note: METHODOLOGY_NOTE.to_string(),
    }
}

/// Sum of the lines in one life-cycle phase.
pub fn phase_total(lines: &[EmissionLine], phase: Phase) -> f64 {
    stable_sum(lines.iter().filter(|l| l.phase == phase).map(|l| l.kgco2e))
}

impl Render for Report {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => {
                let mut out = String::from("year,scope,group,kgco2e,uncertainty\n");
                let y = self.reporting_year;
                for (scope, v) in &self.totals_by_scope {
                    let _ = writeln!(out, "{y},{scope},all,{},", fmt1(*v));
                }
                for (group, v) in &self.totals_by_group {
                    let _ = writeln!(out, "{y},all,{group},{},", fmt1(*v));
                }
                let _ = writeln!(out, "{y},all,external,{},", fmt1(self.external_total));
                let _ = writeln!(
                    out,
                    "{y},all,all,{},{}",
                    fmt1(self.grand_total_kgco2e),
                    fmt1(self.abs_uncertainty_kgco2e)
                );
                out
            }
            Format::Markdown => {
                let mut out = format!("# IT carbon assessment {}\n\n", self.reporting_year);
                let _ = writeln!(out, "**Perimeter:** {}\n", self.perimeter);
                let _ = writeln!(
                    out,
                    "**Total:** {} ± {} kgCO₂e ({} emission lines)\n",
                    fmt1(self.grand_total_kgco2e),
                    fmt1(self.abs_uncertainty_kgco2e),
                    self.line_count
                );
                out.push_str("## By scope\n\n| Scope | kgCO₂e |\n|---|---:|\n");
                for (scope, v) in &self.totals_by_scope {
                    let _ = writeln!(out, "| {scope} | {} |", fmt1(*v));
                }
                out.push_str("\n## By equipment group\n\n| Group | kgCO₂e |\n|---|---:|\n");
                for (group, v) in &self.totals_by_group {
                    let _ = writeln!(out, "| {group} | {} |", fmt1(*v));
                }
                let _ = writeln!(out, "| external | {} |", fmt1(self.external_total));
                let _ = writeln!(out, "\n## Methodology\n\n{}\n", self.generated_note);
                if !self.factor_db_hash.is_empty() {
                    let _ = writeln!(out, "Factor database: `{}`", self.factor_db_hash);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Delta {
    pub absolute: f64,
    /// `None` when the previous value is 0.
    pub percent: Option<f64>,
}

impl Delta {
    pub fn between(previous: f64, next: f64) -> Self {
        Delta {
            absolute: next - previous,
            percent: (previous != 0.0).then(|| (next - previous) / previous * 100.0),
        }
    }

    fn percent_text(&self) -> String {
        self.percent
            .map_or_else(|| "n/a".to_string(), |p| format!("{}%", fmt1(p)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearDelta {
    pub from_year: i32,
    pub to_year: i32,
    pub by_scope: BTreeMap<Scope, Delta>,
    pub total: Delta,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YearComparison {
    pub years: Vec<i32>,
    pub scope_series: BTreeMap<Scope, Vec<f64>>,
    pub total_series: Vec<f64>,
    pub deltas: Vec<YearDelta>,
    pub warnings: Vec<String>,
}

pub fn compare_years(reports: &[Report]) -> Result<YearComparison, ReportError> {
    if reports.len() < 2 {
        return Err(ReportError::TooFewReports(reports.len()));
    }
    let mut sorted: Vec<&Report> = reports.iter().collect();
    sorted.sort_by_key(|r| r.reporting_year);
    if let Some(w) = sorted
        .windows(2)
        .find(|w| w[0].reporting_year == w[1].reporting_year)
    {
        return Err(ReportError::DuplicateYear(w[0].reporting_year));
    }

    let mut warnings = Vec::new();
    let perimeters: HashSet<&str> = sorted.iter().map(|r| r.perimeter.as_str()).collect();
    if perimeters.len() > 1 {
        warnings.push(format!(
            "perimeters differ between years: {}",
            sorted
                .iter()
                .map(|r| format!("{} = \"{}\"", r.reporting_year, r.perimeter))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    let hashes: HashSet<&str> = sorted.iter().map(|r| r.factor_db_hash.as_str()).collect();
    if hashes.len() > 1 {
        warnings.push(
            "factor databases differ between years; part of the change may come from \
             updated factors rather than the fleet"
                .to_string(),
        );
    }

    let scope_series = Scope::ALL
        .iter()
        .map(|&s| (s, sorted.iter().map(|r| r.scope_total(s)).collect()))
        .collect();
    let deltas = sorted
        .windows(2)
        .map(|w| YearDelta {
            from_year: w[0].reporting_year,
            to_year: w[1].reporting_year,
            by_scope: Scope::ALL
                .iter()
                .map(|&s| (s, Delta::between(w[0].scope_total(s), w[1].scope_total(s))))
                .collect(),
            total: Delta::between(w[0].grand_total_kgco2e, w[1].grand_total_kgco2e),
        })
        .collect();
    Ok(YearComparison {
        years: sorted.iter().map(|r| r.reporting_year).collect(),
        scope_series,
        total_series: sorted.iter().map(|r| r.grand_total_kgco2e).collect(),
        deltas,
        warnings,
    })
}

impl Render for YearComparison {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("comparison serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut out = String::from("year,scope,kgco2e,delta_kgco2e,delta_percent\n");
                for (i, year) in self.years.iter().enumerate() {
                    let delta = i.checked_sub(1).map(|j| &self.deltas[j]);
                    for (scope, series) in &self.scope_series {
                        let d = delta.map(|d| d.by_scope[scope]);
                        let _ = writeln!(
                            out,
                            "{year},{scope},{},{},{}",
                            fmt1(series[i]),
                            d.map(|d| fmt1(d.absolute)).unwrap_or_default(),
                            d.map(|d| d.percent_text()).unwrap_or_default()
                        );
                    }
                    let d = delta.map(|d| d.total);
                    let _ = writeln!(
                        out,
                        "{year},all,{},{},{}",
                        fmt1(self.total_series[i]),
                        d.map(|d| fmt1(d.absolute)).unwrap_or_default(),
                        d.map(|d| d.percent_text()).unwrap_or_default()
                    );
                }
                out
            }
            Format::Markdown => {
                let mut out = String::from("# Year-over-year comparison\n\n");
                for w in &self.warnings {
                    let _ = writeln!(out, "> Warning: {w}\n");
                }
                out.push_str("| Year | S1 | S2 | S3 | Total | Δ kgCO₂e | Δ % |\n");
                out.push_str("|---|---:|---:|---:|---:|---:|---:|\n");
                for (i, year) in self.years.iter().enumerate() {
                    let s = |scope| fmt1(self.scope_series[&scope][i]);
                    let (da, dp) = match i.checked_sub(1) {
                        Some(j) => (
                            fmt1(self.deltas[j].total.absolute),
                            self.deltas[j].total.percent_text(),
                        ),
                        None => ("".into(), "".into()),
                    };
                    let _ = writeln!(
                        out,
                        "| {year} | {} | {} | {} | {} | {da} | {dp} |",
                        s(Scope::S1),
                        s(Scope::S2),
                        s(Scope::S3),
                        fmt1(self.total_series[i])
                    );
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioAction {
    Remove { target: String },
    Add { asset: Asset },
    Replace { target: String, asset: Asset },
}

/// Parses an actions file: `op,target_id` followed by the nine fleet-CSV
/// asset columns (`id` through `extra`) for `add` and `replace`.
///
/// An empty acquisition year defaults to `reporting_year`.
pub fn parse_actions(text: &str, reporting_year: i32) -> Result<Vec<ScenarioAction>, ReportError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut actions = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ReportError::Actions {
            row: e
                .position()
                .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0)),
            message: e.to_string(),
        })?;
        let row = record
            .position()
            .map_or(0, |p| usize::try_from(p.line()).unwrap_or(0));
        let fields: Vec<&str> = record.iter().map(str::trim).collect();
        let bad = |message: String| ReportError::Actions { row, message };
        if fields.first() == Some(&"op") {
            continue;
        }
        let asset = || {
            parse_asset_fields(row, fields.get(2..).unwrap_or(&[]), Some(reporting_year))
                .map_err(|e| bad(e.to_string()))
        };
        let target = fields.get(1).copied().unwrap_or("");
        let action = match fields[0] {
            "remove" => {
                if fields.get(2..).unwrap_or(&[]).iter().any(|f| !f.is_empty()) {
                    return Err(bad("remove takes only a target id".into()));
                }
                ScenarioAction::Remove {
                    target: target.to_string(),
                }
            }
            "add" => {
                if !target.is_empty() {
                    return Err(bad("add takes no target id".into()));
                }
                ScenarioAction::Add { asset: asset()? }
            }
            "replace" => ScenarioAction::Replace {
                target: target.to_string(),
                asset: asset()?,
            },
            other => return Err(bad(format!("unknown op `{other}` (remove|add|replace)"))),
        };
        if matches!(
            action,
            ScenarioAction::Remove { .. } | ScenarioAction::Replace { .. }
        ) && target.is_empty()
        {
            return Err(bad("missing target id".into()));
        }
        actions.push(action);
    }
    Ok(actions)
}

/// Applies actions in order to a copy of the fleet.
///
/// A replacement is acquired in the reporting year and, unless it names its
/// own room, moves into the room of the asset it replaces.
pub fn apply_scenario(fleet: &Fleet, actions: &[ScenarioAction]) -> Result<Fleet, ReportError> {
    let mut out = fleet.clone();
    let remove = |out: &mut Fleet, target: &str| {
        let idx = out
            .assets
            .iter()
            .position(|a| a.id == target)
            .ok_or_else(|| ReportError::UnknownTarget(target.to_string()))?;
        Ok::<Asset, ReportError>(out.assets.remove(idx))
    };
    let add = |out: &mut Fleet, asset: Asset| {
        if out.asset(&asset.id).is_some() {
            return Err(ReportError::IdTaken(asset.id));
        }
        out.assets.push(asset);
        Ok(())
    };
    for action in actions {
        match action {
            ScenarioAction::Remove { target } => {
                remove(&mut out, target)?;
            }
            ScenarioAction::Add { asset } => add(&mut out, asset.clone())?,
            ScenarioAction::Replace { target, asset } => {
                let old = remove(&mut out, target)?;
                let mut new = asset.clone();
                new.acquisition_year = out.reporting_year;
                if new.room.is_none() {
                    new.room = old.room;
                }
                add(&mut out, new)?;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioResult {
    pub baseline: Report,
    pub variant: Report,
    pub delta_kgco2e: f64,
    /// Fabrication emissions of assets added or swapped in by the scenario.
    pub added_fabrication_kgco2e: f64,
    /// Baseline S2 minus variant S2.
    pub annual_usage_savings_kgco2e: f64,
    /// Years of usage savings needed to offset the added fabrication.
    pub payback_years: Option<f64>,
    pub verdict: String,
}

impl ScenarioResult {
    pub fn with_factor_db_hash(mut self, hash: &str) -> Self {
        self.baseline = self.baseline.with_factor_db_hash(hash);
        self.variant = self.variant.with_factor_db_hash(hash);
        self
    }
}

pub fn evaluate_scenario(
    fleet: &Fleet,
    actions: &[ScenarioAction],
    db: &FactorDatabase,
    config: &EngineConfig,
) -> Result<ScenarioResult, ReportError> {
    let variant_fleet = apply_scenario(fleet, actions)?;
    let baseline_lines = compute_fleet(fleet, db, config)?;
    let variant_lines = compute_fleet(&variant_fleet, db, config)?;
    let baseline = aggregate(&baseline_lines, fleet);
    let variant = aggregate(&variant_lines, &variant_fleet);

    let added: HashSet<&str> = actions
        .iter()
        .filter_map(|a| match a {
            ScenarioAction::Add { asset } | ScenarioAction::Replace { asset, .. } => {
                Some(asset.id.as_str())
            }
            ScenarioAction::Remove { .. } => None,
        })
        .collect();
    let added_fabrication = stable_sum(
        variant_lines
            .iter()
            .filter(|l| {
                l.phase == Phase::FabricationTransport && added.contains(l.subject_id.as_str())
            })
            .map(|l| l.kgco2e),
    );
    let savings = baseline.scope_total(Scope::S2) - variant.scope_total(Scope::S2);
    let payback_years = (savings > 0.0).then(|| added_fabrication / savings);
    let verdict = match payback_years {
        _ if actions.is_empty() => "no actions: variant equals baseline".to_string(),
        Some(years) => format!(
            "added fabrication of {} kgCO₂e is offset by usage savings of {} kgCO₂e/yr after {:.2} years",
            fmt1(added_fabrication),
            fmt1(savings),
            years
        ),
        None => "no annual usage savings: the variant does not lower scope 2 emissions, \
                 so added fabrication is never paid back"
            .to_string(),
    };
    Ok(ScenarioResult {
        delta_kgco2e: variant.grand_total_kgco2e - baseline.grand_total_kgco2e,
        baseline,
        variant,
        added_fabrication_kgco2e: added_fabrication,
        annual_usage_savings_kgco2e: savings,
        payback_years,
        verdict,
    })
}

impl Render for ScenarioResult {
    fn render(&self, format: Format) -> String {
        let payback = self
            .payback_years
            .map_or_else(|| "n/a".to_string(), |p| format!("{p:.2}"));
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut out = String::from("case,scope,value\n");
                for (case, report) in [("baseline", &self.baseline), ("variant", &self.variant)] {
                    for (scope, v) in &report.totals_by_scope {
                        let _ = writeln!(out, "{case},{scope},{}", fmt1(*v));
                    }
                    let _ = writeln!(out, "{case},all,{}", fmt1(report.grand_total_kgco2e));
                }
                let _ = writeln!(out, "delta,all,{}", fmt1(self.delta_kgco2e));
                let _ = writeln!(
                    out,
                    "added_fabrication,S3,{}",
                    fmt1(self.added_fabrication_kgco2e)
                );
                let _ = writeln!(
                    out,
                    "annual_usage_savings,S2,{}",
                    fmt1(self.annual_usage_savings_kgco2e)
                );
                let _ = writeln!(out, "payback_years,all,{payback}");
                out
            }
            Format::Markdown => {
                let mut out = format!(
                    "# What-if scenario {}\n\n**Perimeter:** {}\n\n",
                    self.baseline.reporting_year, self.baseline.perimeter
                );
                out.push_str("| | Baseline | Variant |\n|---|---:|---:|\n");
                for scope in Scope::ALL {
                    let _ = writeln!(
                        out,
                        "| {scope} | {} | {} |",
                        fmt1(self.baseline.scope_total(scope)),
                        fmt1(self.variant.scope_total(scope))
                    );
                }
                let _ = writeln!(
                    out,
                    "| Total | {} ± {} | {} ± {} |\n",
                    fmt1(self.baseline.grand_total_kgco2e),
                    fmt1(self.baseline.abs_uncertainty_kgco2e),
                    fmt1(self.variant.grand_total_kgco2e),
                    fmt1(self.variant.abs_uncertainty_kgco2e)
                );
                let _ = writeln!(out, "Delta: {} kgCO₂e\n", fmt1(self.delta_kgco2e));
                let _ = writeln!(
                    out,
                    "Annual usage savings: {} kgCO₂e/yr\n",
                    fmt1(self.annual_usage_savings_kgco2e)
                );
                let _ = writeln!(out, "Payback: {payback} years\n");
                let _ = writeln!(out, "{}", self.verdict);
                out
            }
        }
    }
}

/// Merged factor table with each winner's reliability rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorListing(pub FactorDatabase);

#[derive(Serialize)]
struct ListingRow<'a> {
    category: &'a str,
    fab_transport_kgco2e: f64,
    eol_kgco2e: f64,
    typical_power_w: f64,
    rel_uncertainty: f64,
    source: &'a str,
    source_year: i32,
    source_kind: &'a str,
    rank: u32,
}

impl FactorListing {
    pub fn new(db: &FactorDatabase) -> Self {
        FactorListing(db.merge())
    }

    fn rows(&self) -> Vec<ListingRow<'_>> {
        self.0
            .factors
            .iter()
            .map(|f| ListingRow {
                category: f.category.id(),
                fab_transport_kgco2e: f.fab_transport_kgco2e,
                eol_kgco2e: f.eol_kgco2e,
                typical_power_w: f.typical_power_w,
                rel_uncertainty: f.rel_uncertainty,
                source: &f.source.name,
                source_year: f.source.year,
                source_kind: f.source.kind.as_str(),
                rank: reliability_rank(&f.source),
            })
            .collect()
    }
}

impl Render for FactorListing {
    fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.rows()).expect("rows serialize");
                s.push('\n');
                s
            }
            Format::Csv => crate::factors::render_factor_file(&self.0),
            Format::Markdown => {
                let mut out = String::from(
                    "| Category | Fab+transport kgCO₂e | EoL kgCO₂e | Power W | ± | Source | Rank |\n\
                     |---|---:|---:|---:|---:|---|---:|\n",
                );
                for r in self.rows() {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} | {:.0}% | {} ({}, {}) | {} |",
                        r.category,
                        r.fab_transport_kgco2e,
                        r.eol_kgco2e,
                        r.typical_power_w,
                        r.rel_uncertainty * 100.0,
                        r.source,
                        r.source_year,
                        r.source_kind,
                        r.rank
                    );
                }
                let _ = writeln!(
                    out,
                    "\nGrid factor: {} kgCO₂e/kWh",
                    self.0.default_grid_factor_kgco2e_per_kwh
                );
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::EmissionLine;
    use crate::factors::{EmissionFactor, EquipmentCategory, SourceKind, SourceMeta};

    fn line(id: &str, scope: Scope, group: Option<CategoryGroup>, kg: f64) -> EmissionLine {
        EmissionLine {
            subject_id: id.into(),
            category: None,
            group,
            scope,
            phase: Phase::Usage,
            kgco2e: kg,
            abs_uncertainty_kgco2e: 0.0,
            factor_source: "measured".into(),
        }
    }

    fn report(year: i32, total: f64) -> Report {
        let mut fleet = Fleet::new("Lab", year);
        fleet.reporting_year = year;
        aggregate(
            &[line("a", Scope::S2, Some(CategoryGroup::Office), total)],
            &fleet,
        )
    }

    #[test]
    fn empty_report_is_zero_with_all_keys() {
        let r = aggregate(&[], &Fleet::new("Lab", 2019));
        assert_eq!(r.grand_total_kgco2e, 0.0);
        assert_eq!(r.totals_by_scope.len(), 3);
        assert_eq!(r.totals_by_group.len(), 6);
        assert!(r.totals_by_scope.values().all(|v| *v == 0.0));
        let json = r.render(Format::Json);
        for key in [
            "reporting_year",
            "perimeter",
            "totals_by_scope",
            "\"S1\": 0.0",
            "totals_by_group",
            "\"server_room\": 0.0",
            "external_total",
            "grand_total_kgco2e",
            "abs_uncertainty_kgco2e",
            "line_count",
            "factor_db_hash",
        ] {
            assert!(json.contains(key), "missing {key} in {json}");
        }
    }

    #[test]
    fn aggregates_engine_example() {
        let lines = [
            line("srv", Scope::S2, Some(CategoryGroup::ServerRoom), 208.488),
            line("srv", Scope::S3, Some(CategoryGroup::ServerRoom), 1000.0),
        ];
        let r = aggregate(&lines, &Fleet::new("Lab", 2019));
        assert_eq!(r.grand_total_kgco2e, 1208.488);
        assert_eq!(r.scope_total(Scope::S2), 208.488);
        assert_eq!(r.scope_total(Scope::S3), 1000.0);
        assert_eq!(r.scope_total(Scope::S1), 0.0);
        assert_eq!(r.line_count, 2);

        let mut reversed = lines.to_vec();
        reversed.reverse();
        assert_eq!(aggregate(&reversed, &Fleet::new("Lab", 2019)), r);
    }

    #[test]
    fn externals_report_outside_groups() {
        let lines = [
            line("cloud", Scope::S3, None, 42.0),
            line("pc", Scope::S2, Some(CategoryGroup::Office), 8.0),
        ];
        let r = aggregate(&lines, &Fleet::new("Lab", 2019));
        assert_eq!(r.external_total, 42.0);
        assert_eq!(
            r.totals_by_group.values().sum::<f64>() + r.external_total,
            50.0
        );
    }

    #[test]
    fn markdown_shows_uncertainty() {
        let mut r = report(2019, 1000.0);
        r.abs_uncertainty_kgco2e = 50.0;
        let md = r.render(Format::Markdown);
        assert!(md.contains("± 50.0 kgCO₂e"), "{md}");
        assert!(md.contains("**Perimeter:** Lab"));
        assert!(md.contains("| S2 | 1000.0 |"));
        assert_eq!(md, r.render(Format::Markdown));
    }

    #[test]
    fn csv_layout() {
        let csv = report(2019, 12.34).render(Format::Csv);
        let rows: Vec<_> = csv.lines().collect();
        assert_eq!(rows[0], "year,scope,group,kgco2e,uncertainty");
        assert_eq!(rows[2], "2019,S2,all,12.3,");
        assert_eq!(*rows.last().unwrap(), "2019,all,all,12.3,0.0");
    }

    #[test]
    fn json_round_trip() {
        let mut r = report(2019, 0.1 + 0.2);
        r.abs_uncertainty_kgco2e = 1.0 / 3.0;
        let r = r.with_factor_db_hash("abc");
        assert_eq!(Report::from_json(&r.to_json()).unwrap(), r);
        assert!(Report::from_json("{}").is_err());
    }

    #[test]
    fn compare_deltas() {
        let c = compare_years(&[report(2020, 900.0), report(2019, 1000.0)]).unwrap();
        assert_eq!(c.years, [2019, 2020]);
        assert_eq!(c.deltas[0].total.absolute, -100.0);
        assert_eq!(c.deltas[0].total.percent, Some(-10.0));
        assert!(c.warnings.is_empty());

        let c = compare_years(&[report(2019, 1000.0), report(2020, 1000.0)]).unwrap();
        assert_eq!(
            c.deltas[0].total,
            Delta {
                absolute: 0.0,
                percent: Some(0.0)
            }
        );

        let c = compare_years(&[report(2019, 0.0), report(2020, 50.0)]).unwrap();
        assert_eq!(c.deltas[0].total.percent, None);
        assert!(c.render(Format::Markdown).contains("n/a"));
        assert!(c.render(Format::Csv).contains("2020,all,50.0,50.0,n/a"));
    }

    #[test]
    fn compare_errors_and_warnings() {
        assert_eq!(
            compare_years(&[report(2019, 1.0)]),
            Err(ReportError::TooFewReports(1))
        );
        assert_eq!(
            compare_years(&[report(2019, 1.0), report(2019, 2.0)]),
            Err(ReportError::DuplicateYear(2019))
        );
        let mut other = report(2020, 1.0);
        other.perimeter = "Other lab".into();
        let c = compare_years(&[report(2019, 1.0), other]).unwrap();
        assert_eq!(c.warnings.len(), 1);
    }

    fn server_db() -> FactorDatabase {
        FactorDatabase {
            factors: vec![EmissionFactor {
                category: EquipmentCategory::Server,
                fab_transport_kgco2e: 1000.0,
                eol_kgco2e: 10.0,
                typical_power_w: 300.0,
                rel_uncertainty: 0.3,
                source: SourceMeta {
                    name: "sample".into(),
                    year: 2019,
                    kind: SourceKind::PublicBase,
                    commissioner_neutral: true,
                    peer_reviewed: false,
                },
            }],
            ..FactorDatabase::default()
        }
    }

    fn old_server_fleet() -> Fleet {
        let mut fleet = Fleet::new("Lab", 2019);
        let mut old = Asset::new("srv-old", EquipmentCategory::Server, 1, 2005);
        old.measured_power_w = Some(350.0);
        fleet.assets.push(old);
        fleet
    }

    #[test]
    fn apply_scenario_actions() {
        let fleet = old_server_fleet();
        let removed = apply_scenario(
            &fleet,
            &[ScenarioAction::Remove {
                target: "srv-old".into(),
            }],
        )
        .unwrap();
        assert_eq!(removed.assets.len(), fleet.assets.len() - 1);

        let replaced = apply_scenario(
            &fleet,
            &[ScenarioAction::Replace {
                target: "srv-old".into(),
                asset: Asset::new("srv-new", EquipmentCategory::Server, 1, 1999),
            }],
        )
        .unwrap();
        assert!(replaced.asset("srv-old").is_none());
        assert_eq!(replaced.asset("srv-new").unwrap().acquisition_year, 2019);
        assert_eq!(fleet, old_server_fleet());

        assert_eq!(
            apply_scenario(
                &fleet,
                &[ScenarioAction::Remove {
                    target: "nope".into()
                }]
            ),
            Err(ReportError::UnknownTarget("nope".into()))
        );
        assert_eq!(
            apply_scenario(
                &fleet,
                &[ScenarioAction::Add {
                    asset: Asset::new("srv-old", EquipmentCategory::Server, 1, 2019)
                }]
            ),
            Err(ReportError::IdTaken("srv-old".into()))
        );
    }

    #[test]
    fn server_replacement_payback() {
        let mut new = Asset::new("srv-new", EquipmentCategory::Server, 1, 2019);
        new.measured_power_w = Some(200.0);
        let actions = [ScenarioAction::Replace {
            target: "srv-old".into(),
            asset: new,
        }];
        let r = evaluate_scenario(
            &old_server_fleet(),
            &actions,
            &server_db(),
            &EngineConfig::default(),
        )
        .unwrap();
        // (350 - 200) W × 8760 h / 1000 × 0.119
        assert!((r.annual_usage_savings_kgco2e - 156.366).abs() < 1e-9);
        assert_eq!(r.added_fabrication_kgco2e, 1000.0);
        let payback = r.payback_years.unwrap();
        assert!((payback - 6.40).abs() <= 0.01, "{payback}");
        assert!(r.render(Format::Markdown).contains("Payback: 6.40 years"));
    }

    #[test]
    fn empty_and_worse_scenarios() {
        let fleet = old_server_fleet();
        let r = evaluate_scenario(&fleet, &[], &server_db(), &EngineConfig::default()).unwrap();
        assert_eq!(r.delta_kgco2e, 0.0);
        assert_eq!(r.payback_years, None);

        let mut hungry = Asset::new("srv-new", EquipmentCategory::Server, 1, 2019);
        hungry.measured_power_w = Some(500.0);
        let r = evaluate_scenario(
            &fleet,
            &[ScenarioAction::Replace {
                target: "srv-old".into(),
                asset: hungry,
            }],
            &server_db(),
            &EngineConfig::default(),
        )
        .unwrap();
        assert_eq!(r.payback_years, None);
        assert!(r.verdict.contains("no annual usage savings"));
    }

    #[test]
    fn actions_file() {
        let text = "op,target_id,id,category,quantity,acquisition_year,disposal_year,status,measured_power_w,vendor_fab_kgco2e,extra\n\
                    replace,srv-old,srv-new,server,1,,,in_use,200,,\n\
                    remove,pc-1\n\
                    add,,pc-9,laptop,2,2018,,,,,\n";
        let actions = parse_actions(text, 2019).unwrap();
        assert_eq!(actions.len(), 3);
        match &actions[0] {
            ScenarioAction::Replace { target, asset } => {
                assert_eq!(target, "srv-old");
                assert_eq!(asset.measured_power_w, Some(200.0));
                assert_eq!(asset.acquisition_year, 2019);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            actions[1],
            ScenarioAction::Remove {
                target: "pc-1".into()
            }
        );
        assert!(parse_actions("swap,a\n", 2019).is_err());
        assert!(parse_actions("remove,\n", 2019).is_err());
        assert!(parse_actions("add,x,pc,laptop,1,2019,,,,,\n", 2019).is_err());
        assert!(parse_actions("", 2019).unwrap().is_empty());
    }

    #[test]
    fn fmt1_has_no_negative_zero() {
        assert_eq!(fmt1(-0.04), "0.0");
        assert_eq!(fmt1(1208.488), "1208.5");
        assert_eq!(fmt1(-100.0), "-100.0");
    }
}
