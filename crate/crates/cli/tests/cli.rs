use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ecodiag::samples;
use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ecodiag").chain(args.iter().copied());
    let code = ecodiag_cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// A directory holding the bundled sample files.
fn sample_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    for (name, contents) in samples::ALL {
        fs::write(dir.path().join(name), contents).unwrap();
    }
    dir
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn golden_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

/// Compares against a committed file; `UPDATE_GOLDEN=1` rewrites it.
fn check_golden(name: &str, actual: &str) {
    let path = golden_path(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with UPDATE_GOLDEN=1)", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden");
}

fn compute_sample(dir: &TempDir, format: &str) -> (i32, String, String) {
    run(&[
        "compute",
        "--inventory",
        &p(dir, "fleet.csv"),
        "--factors",
        &p(dir, "factors.txt"),
        "--format",
        format,
    ])
}

#[test]
fn compute_sample_matches_golden_reports() {
    let dir = sample_dir();
    for (format, file) in [
        ("markdown", "sample_report.md"),
        ("json", "sample_report.json"),
        ("csv", "sample_report.csv"),
    ] {
        let (code, out, err) = compute_sample(&dir, format);
        assert_eq!(code, 0, "{err}");
        check_golden(file, &out);
        assert!(err.contains("srv-old: asset age 14 years"), "{err}");
    }
}

#[test]
fn compute_is_byte_identical_and_leaves_inputs_alone() {
    let dir = sample_dir();
    let outputs = ["a.json", "b.json"].map(|name| {
        let out = p(&dir, name);
        let (code, _, err) = run(&[
            "compute",
            "--inventory",
            &p(&dir, "fleet.csv"),
            "--factors",
            &p(&dir, "factors.txt"),
            "--year",
            "2019",
            "--format",
            "json",
            "--out",
            &out,
        ]);
        assert_eq!(code, 0, "{err}");
        fs::read(out).unwrap()
    });
    assert_eq!(outputs[0], outputs[1]);
    for (name, contents) in samples::ALL {
        assert_eq!(fs::read_to_string(dir.path().join(name)).unwrap(), contents);
    }
}

#[test]
fn out_path_may_not_overwrite_an_input() {
    let dir = sample_dir();
    let fleet = p(&dir, "fleet.csv");
    let (code, _, err) = run(&[
        "compute",
        "--inventory",
        &fleet,
        "--factors",
        &p(&dir, "factors.txt"),
        "--out",
        &fleet,
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("refusing to overwrite"), "{err}");
    assert_eq!(fs::read_to_string(&fleet).unwrap(), samples::FLEET);
}

#[test]
fn missing_factor_is_a_validation_failure() {
    let dir = sample_dir();
    let without_tablet: String = samples::FACTORS
        .lines()
        .filter(|l| !l.starts_with("tablet,"))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(dir.path().join("factors.txt"), without_tablet).unwrap();
    let (code, out, err) = compute_sample(&dir, "markdown");
    assert_eq!(code, 2);
    assert!(out.is_empty());
    assert!(err.contains("missing factor: tablet"), "{err}");
}

#[test]
fn unreadable_or_incomplete_inputs_exit_1() {
    let dir = sample_dir();
    let factors = p(&dir, "factors.txt");
    let (code, _, err) = run(&[
        "compute",
        "--inventory",
        "/nonexistent.csv",
        "--factors",
        &factors,
    ]);
    assert_eq!(code, 1, "{err}");

    let bare = p(&dir, "bare.csv");
    let body: String = samples::FLEET
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    fs::write(&bare, body).unwrap();
    let (code, _, err) = run(&["compute", "--inventory", &bare, "--factors", &factors]);
    assert_eq!(code, 1);
    assert!(err.contains("reporting year"), "{err}");
    let (code, _, err) = run(&[
        "compute",
        "--inventory",
        &bare,
        "--factors",
        &factors,
        "--year",
        "2019",
    ]);
    assert_eq!(code, 1);
    assert!(err.contains("perimeter"), "{err}");
    let (code, _, _) = run(&[
        "compute",
        "--inventory",
        &bare,
        "--factors",
        &factors,
        "--year",
        "2019",
        "--perimeter",
        "GATE",
    ]);
    assert_eq!(code, 0);

    let (code, _, _) = run(&["compute", "--bogus"]);
    assert_eq!(code, 1);
    let (code, _, _) = run(&[
        "compute",
        "--inventory",
        &bare,
        "--factors",
        &factors,
        "--grid-factor",
        "0",
    ]);
    assert_eq!(code, 1);
}

#[test]
fn grid_factor_flag_overrides_the_file() {
    let dir = sample_dir();
    let args = |grid: &'static str| {
        let (code, out, _) = run(&[
            "compute",
            "--inventory",
            &p(&dir, "fleet.csv"),
            "--factors",
            &p(&dir, "factors.txt"),
            "--format",
            "json",
            "--grid-factor",
            grid,
        ]);
        assert_eq!(code, 0);
        ecodiag::Report::from_json(&out).unwrap()
    };
    let base = args("0.119");
    let doubled = args("0.238");
    assert_eq!(doubled.totals_by_scope, {
        let mut t = base.totals_by_scope.clone();
        // Declared S2 entries are not grid electricity; the sample has none.
        *t.get_mut(&ecodiag::Scope::S2).unwrap() *= 2.0;
        t
    });
}

#[test]
fn validate_exit_codes() {
    let dir = sample_dir();
    let factors = p(&dir, "factors.txt");
    let (code, out, _) = run(&[
        "validate",
        "--inventory",
        &p(&dir, "fleet.csv"),
        "--factors",
        &factors,
    ]);
    assert_eq!(code, 0);
    assert!(
        out.contains("warning: srv-2005: asset age 14 years"),
        "{out}"
    );
    assert!(out.contains("0 error(s), 2 warning(s)"), "{out}");

    let clean = p(&dir, "clean.csv");
    fs::write(
        &clean,
        "# year: 2019\n# perimeter: lab\n\
         kind,id,category,quantity,acquisition_year,disposal_year,status,measured_power_w,vendor_fab_kgco2e,extra\n\
         asset,pc,desktop,3,2018,,in_use,,,\n",
    )
    .unwrap();
    let (code, out, _) = run(&["validate", "--inventory", &clean, "--factors", &factors]);
    assert_eq!(code, 0);
    assert_eq!(out, "0 error(s), 0 warning(s)\n");

    fs::write(
        &clean,
        fs::read_to_string(&clean)
            .unwrap()
            .replace("desktop", "toaster"),
    )
    .unwrap();
    let (code, _, err) = run(&["validate", "--inventory", &clean, "--factors", &factors]);
    assert_eq!(code, 2);
    assert!(err.contains("toaster"), "{err}");
}

#[test]
fn glpi_import_lists_unmapped_records() {
    let dir = sample_dir();
    let (code, _, err) = run(&[
        "compute",
        "--glpi",
        "--inventory",
        &p(&dir, "glpi.csv"),
        "--rules",
        &p(&dir, "rules.csv"),
        "--factors",
        &p(&dir, "factors.txt"),
        "--year",
        "2019",
        "--perimeter",
        "GATE",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(err.contains("GATE-BADGE-1"), "{err}");
    assert!(err.contains("not counted"), "{err}");
}

fn write_report(dir: &TempDir, name: &str, year: &str, perimeter: &str) -> String {
    let out = p(dir, name);
    let (code, _, err) = run(&[
        "compute",
        "--inventory",
        &p(dir, "fleet.csv"),
        "--factors",
        &p(dir, "factors.txt"),
        "--year",
        year,
        "--perimeter",
        perimeter,
        "--format",
        "json",
        "--out",
        &out,
    ]);
    assert_eq!(code, 0, "{err}");
    out
}

#[test]
fn compare_reports() {
    let dir = sample_dir();
    let a = write_report(&dir, "2018.json", "2018", "GATE");
    let b = write_report(&dir, "2019.json", "2019", "GATE");
    let (code, out, err) = run(&["compare", &b, &a]);
    assert_eq!(code, 0, "{err}");
    assert!(err.is_empty(), "{err}");
    check_golden("compare.md", &out);

    let (code, _, err) = run(&["compare", &a]);
    assert_eq!(code, 1);
    assert!(err.contains("at least two"), "{err}");

    let c = write_report(&dir, "other.json", "2020", "Somewhere else");
    let (code, _, err) = run(&["compare", &a, &c]);
    assert_eq!(code, 0);
    assert!(err.contains("warning"), "{err}");
}

#[test]
fn scenario_command() {
    let dir = sample_dir();
    let base = [
        "scenario".to_string(),
        "--inventory".into(),
        p(&dir, "fleet.csv"),
        "--factors".into(),
        p(&dir, "factors.txt"),
        "--actions".into(),
    ];
    let with = |actions: &str| {
        let mut args: Vec<&str> = base.iter().map(String::as_str).collect();
        args.push(actions);
        run(&args)
    };

    let (code, out, err) = with(&p(&dir, "actions.csv"));
    assert_eq!(code, 0, "{err}");
    check_golden("scenario.md", &out);
    assert!(out.contains("Payback: 5.81 years"), "{out}");

    let header = samples::ACTIONS
        .lines()
        .find(|l| l.starts_with("op,"))
        .unwrap();
    let empty = p(&dir, "empty.csv");
    fs::write(&empty, format!("{header}\n")).unwrap();
    let (code, out, _) = with(&empty);
    assert_eq!(code, 0);
    assert!(out.contains("Delta: 0.0 kgCO₂e"), "{out}");

    let bad = p(&dir, "bad.csv");
    fs::write(&bad, format!("{header}\nremove,no-such-asset\n")).unwrap();
    let (code, _, err) = with(&bad);
    assert_eq!(code, 2);
    assert!(err.contains("no-such-asset"), "{err}");
}

#[test]
fn factors_command() {
    let dir = sample_dir();
    let (code, out, _) = run(&["factors", "--factors", &p(&dir, "factors.txt")]);
    assert_eq!(code, 0);
    check_golden("factors.md", &out);
    let rows = out
        .lines()
        .filter(|l| l.starts_with("| ") && !l.starts_with("| Category"))
        .count();
    assert_eq!(rows, ecodiag::EquipmentCategory::ALL.len());

    let bad = p(&dir, "bad.txt");
    fs::write(&bad, "[factors]\nlaptop,1,2,3\n").unwrap();
    let (code, _, err) = run(&["factors", "--factors", &bad]);
    assert_eq!(code, 1);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn init_refuses_to_overwrite() {
    let dir = TempDir::new().unwrap();
    let target = p(&dir, "work");
    let (code, out, _) = run(&["init", &target]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), samples::ALL.len());
    for (name, contents) in samples::ALL {
        assert_eq!(
            fs::read_to_string(dir.path().join("work").join(name)).unwrap(),
            contents
        );
    }
    fs::write(dir.path().join("work/fleet.csv"), "edited").unwrap();
    let (code, _, err) = run(&["init", &target]);
    assert_eq!(code, 1);
    assert!(err.contains("--force"), "{err}");
    assert_eq!(
        fs::read_to_string(dir.path().join("work/fleet.csv")).unwrap(),
        "edited"
    );
    let (code, _, _) = run(&["init", "--force", &target]);
    assert_eq!(code, 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("work/fleet.csv")).unwrap(),
        samples::FLEET
    );
}

#[test]
fn binary_reads_factors_path_from_the_environment() {
    let dir = sample_dir();
    let output = Command::new(env!("CARGO_BIN_EXE_ecodiag"))
        .args([
            "compute",
            "--format",
            "json",
            "--inventory",
            &p(&dir, "fleet.csv"),
        ])
        .env("ECODIAG_FACTORS", p(&dir, "factors.txt"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let golden = fs::read_to_string(golden_path("sample_report.json")).unwrap();
    assert_eq!(String::from_utf8(output.stdout).unwrap(), golden);

    let output = Command::new(env!("CARGO_BIN_EXE_ecodiag"))
        .args([
            "validate",
            "--inventory",
            "/nonexistent.csv",
            "--factors",
            "/nonexistent.txt",
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn help_exits_0() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, 0);
    for cmd in [
        "compute", "validate", "compare", "scenario", "factors", "init",
    ] {
        assert!(out.contains(cmd), "{out}");
    }
}
