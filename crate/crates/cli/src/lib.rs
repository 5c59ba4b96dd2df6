//! `ecodiag` command line.
//!
//! Exit codes: 0 success, 1 I/O, parse or usage failure, 2 validation failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ecodiag::engine::GridFactor;
use ecodiag::factors::content_hash;
use ecodiag::inventory::{scan_directives, validate_fleet};
use ecodiag::report::FactorListing;
use ecodiag::{
    aggregate, compare_years, compute_fleet, evaluate_scenario, load_factor_db, parse_actions,
    parse_fleet_csv, parse_glpi_export, parse_rules, samples, EngineConfig, FactorDatabase, Fleet,
    Format, InventoryError, Issue, Render, Report, ReportError,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ecodiag",
    version,
    about = "Annual greenhouse-gas assessment of an IT fleet"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Fleet CSV, or a GLPI export with --glpi.
    #[arg(long)]
    pub inventory: PathBuf,
    /// Factor file.
    #[arg(long, env = "ECODIAG_FACTORS")]
    pub factors: PathBuf,
    /// Reporting year; defaults to the inventory's `# year:` directive.
    #[arg(long)]
    pub year: Option<i32>,
    /// Organizational perimeter; defaults to the inventory's `# perimeter:` directive.
    #[arg(long)]
    pub perimeter: Option<String>,
    /// Grid factor in kgCO2e/kWh, overriding the factor file.
    #[arg(long = "grid-factor")]
    pub grid_factor: Option<f64>,
    /// Treat the inventory as a GLPI CSV export.
    #[arg(long)]
    pub glpi: bool,
    /// Mapping rules for --glpi (defaults to the bundled sample rules).
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = "markdown", value_parser = parse_format)]
    pub format: Format,
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the annual report.
    Compute {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Check the inventory against the factor database.
    Validate {
        #[command(flatten)]
        inputs: InputArgs,
    },
    /// Compare JSON reports from several years.
    Compare {
        reports: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Evaluate a what-if actions file against the inventory.
    Scenario {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        actions: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// List the merged factor database.
    Factors {
        #[arg(long, env = "ECODIAG_FACTORS")]
        factors: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Write sample factors, fleet, rules, GLPI export and actions to a directory.
    Init {
        dir: PathBuf,
        /// Overwrite existing files.
        #[arg(long)]
        force: bool,
    },
}

#[derive(Debug)]
enum Failure {
    /// I/O, parse or usage problem.
    Input(String),
    /// Inputs are readable but not valid for computation.
    Invalid(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_FAILURE,
            Failure::Invalid(_) => EXIT_INVALID,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

struct Loaded {
    db: FactorDatabase,
    factor_hash: String,
    fleet: Fleet,
    config: EngineConfig,
    issues: Vec<Issue>,
}

impl Loaded {
    fn errors(&self) -> usize {
        self.issues.iter().filter(|i| i.is_error()).count()
    }
}

fn load(inputs: &InputArgs) -> Result<Loaded, Failure> {
    let factor_text = read(&inputs.factors)?;
    let db = load_factor_db(&factor_text)
        .map_err(|e| Failure::Input(format!("{}: {e}", inputs.factors.display())))?
        .merge();
    let inventory_text = read(&inputs.inventory)?;
    let directives = scan_directives(&inventory_text);
    let year = inputs.year.or(directives.year).ok_or_else(|| {
        Failure::Input("reporting year unknown: pass --year or add a `# year:` line".into())
    })?;
    let perimeter = inputs
        .perimeter
        .clone()
        .or(directives.perimeter)
        .filter(|p| !p.trim().is_empty())
        .ok_or_else(|| {
            Failure::Input(
                "perimeter must be declared: pass --perimeter or add a `# perimeter:` line".into(),
            )
        })?;

    let mut issues = Vec::new();
    let fleet = if inputs.glpi {
        let rules_text = match &inputs.rules {
            Some(path) => read(path)?,
            None => samples::RULES.to_string(),
        };
        let rules = parse_rules(&rules_text).map_err(|e| Failure::Input(format!("rules: {e}")))?;
        let import = parse_glpi_export(&inventory_text, &rules, year, &perimeter)
            .map_err(|e| Failure::Input(format!("{}: {e}", inputs.inventory.display())))?;
        issues.extend(import.issues);
        for u in &import.unmapped {
            issues.push(Issue::warning(
                &format!("row {}", u.record.row),
                format!(
                    "`{}` ({} / {}) not counted: {}",
                    u.record.name, u.record.type_, u.record.model, u.reason
                ),
            ));
        }
        import.fleet
    } else {
        parse_fleet_csv(&inventory_text, year, &perimeter).map_err(|e| {
            let msg = format!("{}: {e}", inputs.inventory.display());
            match e {
                InventoryError::Invalid { .. } | InventoryError::DuplicateId { .. } => {
                    Failure::Invalid(msg)
                }
                _ => Failure::Input(msg),
            }
        })?
    };

    let mut config = EngineConfig::for_database(&db);
    if let Some(grid) = inputs.grid_factor {
        config.grid =
            GridFactor::new(grid, "--grid-factor").map_err(|e| Failure::Input(e.to_string()))?;
    }
    issues.extend(validate_fleet(&fleet, &db));
    Ok(Loaded {
        db,
        factor_hash: content_hash(&factor_text),
        fleet,
        config,
        issues,
    })
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => false,
    }
}

fn emit(
    output: &OutputArgs,
    text: &str,
    inputs: &[&Path],
    stdout: &mut dyn Write,
) -> Result<(), Failure> {
    match &output.out {
        Some(path) => {
            if inputs.iter().any(|i| same_file(i, path)) {
                return Err(Failure::Input(format!(
                    "refusing to overwrite input file {}",
                    path.display()
                )));
            }
            fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
        }
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(e.to_string())),
    }
}

fn print_issues(issues: &[Issue], w: &mut dyn Write) {
    for issue in issues {
        let _ = writeln!(w, "{issue}");
    }
}

fn input_paths(inputs: &InputArgs) -> Vec<&Path> {
    let mut paths = vec![inputs.inventory.as_path(), inputs.factors.as_path()];
    paths.extend(inputs.rules.as_deref());
    paths
}

fn compute(
    inputs: &InputArgs,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let loaded = load(inputs)?;
    print_issues(&loaded.issues, stderr);
    if loaded.errors() > 0 {
        return Err(Failure::Invalid(format!(
            "{} validation error(s); no report produced",
            loaded.errors()
        )));
    }
    let lines = compute_fleet(&loaded.fleet, &loaded.db, &loaded.config)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    let report = aggregate(&lines, &loaded.fleet).with_factor_db_hash(&loaded.factor_hash);
    emit(
        output,
        &report.render(output.format),
        &input_paths(inputs),
        stdout,
    )
}

fn validate(inputs: &InputArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let loaded = load(inputs)?;
    print_issues(&loaded.issues, stdout);
    let errors = loaded.errors();
    let warnings = loaded.issues.len() - errors;
    let _ = writeln!(stdout, "{errors} error(s), {warnings} warning(s)");
    if errors > 0 {
        return Err(Failure::Invalid(format!("{errors} validation error(s)")));
    }
    Ok(())
}

fn compare(
    paths: &[PathBuf],
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    if paths.len() < 2 {
        return Err(Failure::Input(format!(
            "compare needs at least two report files, got {}",
            paths.len()
        )));
    }
    let reports = paths
        .iter()
        .map(|p| {
            Report::from_json(&read(p)?)
                .map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let comparison = compare_years(&reports).map_err(|e| Failure::Input(e.to_string()))?;
    for w in &comparison.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let inputs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    emit(output, &comparison.render(output.format), &inputs, stdout)
}

fn scenario(
    inputs: &InputArgs,
    actions_path: &Path,
    output: &OutputArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<(), Failure> {
    let loaded = load(inputs)?;
    print_issues(&loaded.issues, stderr);
    if loaded.errors() > 0 {
        return Err(Failure::Invalid(format!(
            "{} validation error(s) in the baseline fleet",
            loaded.errors()
        )));
    }
    let actions = parse_actions(&read(actions_path)?, loaded.fleet.reporting_year)
        .map_err(|e| Failure::Input(format!("{}: {e}", actions_path.display())))?;
    let result = evaluate_scenario(&loaded.fleet, &actions, &loaded.db, &loaded.config)
        .map_err(|e| match e {
            ReportError::Json(_) | ReportError::Actions { .. } => Failure::Input(e.to_string()),
            other => Failure::Invalid(other.to_string()),
        })?
        .with_factor_db_hash(&loaded.factor_hash);
    let mut paths = input_paths(inputs);
    paths.push(actions_path);
    emit(output, &result.render(output.format), &paths, stdout)
}

fn factors(path: &Path, output: &OutputArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let db = load_factor_db(&read(path)?)
        .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    emit(
        output,
        &FactorListing::new(&db).render(output.format),
        &[path],
        stdout,
    )
}

fn init(dir: &Path, force: bool, stdout: &mut dyn Write) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    if !force {
        if let Some((name, _)) = samples::ALL.iter().find(|(n, _)| dir.join(n).exists()) {
            return Err(Failure::Input(format!(
                "{} already exists (use --force to overwrite)",
                dir.join(name).display()
            )));
        }
    }
    for (name, contents) in samples::ALL {
        let path = dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    Ok(())
}

/// Runs the command line, returning the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            if informational {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let _ = write!(stderr, "{e}");
            return EXIT_FAILURE;
        }
    };
    let result = match &cli.command {
        Command::Compute { inputs, output } => compute(inputs, output, stdout, stderr),
        Command::Validate { inputs } => validate(inputs, stdout),
        Command::Compare { reports, output } => compare(reports, output, stdout, stderr),
        Command::Scenario {
            inputs,
            actions,
            output,
        } => scenario(inputs, actions, output, stdout, stderr),
        Command::Factors {
            factors: path,
            output,
        } => factors(path, output, stdout),
        Command::Init { dir, force } => init(dir, *force, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(failure) => {
            let (Failure::Input(msg) | Failure::Invalid(msg)) = &failure;
            let _ = writeln!(stderr, "error: {msg}");
            failure.code()
        }
    }
}
