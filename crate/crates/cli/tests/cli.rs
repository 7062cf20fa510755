use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FIXTURE_FILES: [&str; 9] = [
    "occupations.csv",
    "matrix.csv",
    "cbp.csv",
    "density.csv",
    "national_sizes.csv",
    "concordance.csv",
    "industry_names.csv",
    "regions.csv",
    "oracle.py",
];

const CONFIG: &str = r#"output_dir = "out"

[inputs]
occupations = "occupations.csv"
matrix = "matrix.csv"
cbp = "cbp.csv"
density = "density.csv"
national_sizes = "national_sizes.csv"
concordance = "concordance.csv"
industry_names = "industry_names.csv"
region_groups = "regions.csv"
"#;

// From tests/fixtures/e2e/oracle.py in the core crate.
const EPS: f64 = 0.071577300785180073;
const CAP: f64 = 0.48762957407014835;
const CAP_FIXED_002: f64 = 0.49634957663292879;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/e2e")
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// A scratch copy of the fixture with `run.toml` next to the data.
fn workspace(config: &str) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in FIXTURE_FILES {
        fs::copy(fixture().join(f), dir.path().join(f)).unwrap();
    }
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_distancing"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

/// Compares against tests/golden; set `DISTANCING_UPDATE_GOLDEN=1` to rewrite them.
fn golden(dir: &Path, name: &str) {
    let actual = read(dir, name);
    let path = golden_dir().join(name);
    if std::env::var_os("DISTANCING_UPDATE_GOLDEN").is_some() {
        fs::create_dir_all(golden_dir()).unwrap();
        fs::write(&path, &actual).unwrap();
        return;
    }
    let expected = fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} differs from golden file");
}

fn metric(csv: &str, name: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("{name},")))
        .unwrap_or_else(|| panic!("no {name} in\n{csv}"))
        .parse()
        .unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["index", "calibrate", "subsidy", "fig2", "lowess"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn index_matches_golden_files() {
    let dir = workspace(CONFIG);
    let stdout = ok(dir.path(), &["-c", "run.toml", "index"]);
    assert!(stdout.contains("communication 4"), "{stdout}");
    for f in ["occupation-flags.csv", "industry-index.csv", "location-index.csv"] {
        golden(dir.path(), f);
    }
    let first = read(dir.path(), "industry-index.csv");
    let first_line = first.lines().next().unwrap();
    assert!(first_line.starts_with(&format!("# distancing {} config=", env!("CARGO_PKG_VERSION"))));
}

#[test]
fn index_without_geo_inputs_skips_location_index() {
    let config = "output_dir = \"out\"\n[inputs]\noccupations = \"occupations.csv\"\nmatrix = \"matrix.csv\"\n";
    let dir = workspace(config);
    ok(dir.path(), &["-c", "run.toml", "index"]);
    assert!(dir.path().join("out/industry-index.csv").exists());
    assert!(!dir.path().join("out/location-index.csv").exists());
}

#[test]
fn missing_input_exits_two_with_path() {
    let dir = workspace(CONFIG);
    fs::remove_file(dir.path().join("matrix.csv")).unwrap();
    let out = run(dir.path(), &["-c", "run.toml", "index"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("matrix.csv"), "{err}");
}

#[test]
fn missing_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["-c", "nope.toml", "index"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("nope.toml"));
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = workspace(&format!("{CONFIG}\n[targets]\nshare = 0.5\n"));
    assert_eq!(run(dir.path(), &["-c", "run.toml", "calibrate"]).status.code(), Some(2));
}

#[test]
fn calibrate_reports_fitted_eps_and_cap() {
    let dir = workspace(CONFIG);
    let stdout = ok(dir.path(), &["-c", "run.toml", "calibrate"]);
    assert!(stdout.contains("(fitted)"), "{stdout}");
    let csv = read(dir.path(), "calibration.csv");
    assert!(rel_close(metric(&csv, "eps"), EPS, 1e-9));
    assert!(rel_close(metric(&csv, "contact_cap"), CAP, 1e-9));
    assert!(rel_close(metric(&csv, "achieved_slope"), 0.04, 1e-9));
    assert!(rel_close(metric(&csv, "achieved_contact_share"), 0.5, 1e-9));
    assert_eq!(metric(&csv, "eps_fixed"), 0.0);
}

#[test]
fn fixed_eps_flag_is_honored() {
    let dir = workspace(CONFIG);
    ok(dir.path(), &["-c", "run.toml", "calibrate", "--fixed-eps", "0.02"]);
    let csv = read(dir.path(), "calibration.csv");
    assert_eq!(metric(&csv, "eps"), 0.02);
    assert_eq!(metric(&csv, "eps_fixed"), 1.0);
    assert!(rel_close(metric(&csv, "contact_cap"), CAP_FIXED_002, 1e-9));
}

#[test]
fn flag_overrides_change_the_config_hash() {
    let dir = workspace(CONFIG);
    ok(dir.path(), &["-c", "run.toml", "calibrate"]);
    let a = read(dir.path(), "calibration.csv");
    ok(dir.path(), &["-c", "run.toml", "calibrate", "--fixed-eps", "0.02"]);
    let b = read(dir.path(), "calibration.csv");
    assert_ne!(a.lines().next(), b.lines().next());
}

#[test]
fn fixed_eps_in_config_file() {
    let dir = workspace(&format!("{CONFIG}\n[targets]\nfixed_eps = 0.02\n"));
    ok(dir.path(), &["-c", "run.toml", "calibrate"]);
    assert_eq!(metric(&read(dir.path(), "calibration.csv"), "eps"), 0.02);
}

#[test]
fn bad_target_exits_two() {
    let dir = workspace(CONFIG);
    let out = run(dir.path(), &["-c", "run.toml", "calibrate", "--target-share", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("contact_share"));
    let out = run(dir.path(), &["-c", "run.toml", "subsidy", "--target-elasticity", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_threads_exits_two() {
    let dir = workspace(CONFIG);
    assert_eq!(run(dir.path(), &["-c", "run.toml", "--threads", "0", "index"]).status.code(), Some(2));
}

#[test]
fn subsidy_matches_golden_files() {
    let dir = workspace(CONFIG);
    let stdout = ok(dir.path(), &["-c", "run.toml", "subsidy"]);
    assert!(stdout.contains("average wage subsidy 82.6%"), "{stdout}");
    for f in [
        "sector-subsidy.csv",
        "location-subsidy.csv",
        "region-subsidy.csv",
        "calibration.csv",
        "fig2-calibrated.csv",
    ] {
        golden(dir.path(), f);
    }
}

#[test]
fn subsidy_tables_match_oracle() {
    let dir = workspace(CONFIG);
    ok(dir.path(), &["-c", "run.toml", "subsidy"]);
    let sectors = read(dir.path(), "sector-subsidy.csv");
    let rows: Vec<&str> = sectors.lines().skip(2).collect();
    assert_eq!(
        rows,
        [
            "Retail Trade,91.3,1.4",
            "Construction,62.7,0.1",
            "Accommodation and Food Services,57.0,0.4",
            "Average,82.6,1.9",
        ]
    );
    let regions = read(dir.path(), "region-subsidy.csv");
    let rows: Vec<&str> = regions.lines().skip(1).collect();
    assert_eq!(rows[0], "region,wage_subsidy_pct,employment");
    assert!(rows[1].starts_with("Metro,86.4,"));
    assert!(rows[2].starts_with("Rural,74.5,"));
}

#[test]
fn empty_exclusion_list_keeps_all_sectors() {
    let dir = workspace(CONFIG);
    fs::write(dir.path().join("none.csv"), "naics\n").unwrap();
    ok(dir.path(), &["-c", "run.toml", "subsidy", "--exclusions", "none.csv"]);
    let with_all = read(dir.path(), "sector-subsidy.csv");
    assert!(with_all.contains("Hospitals,"), "{with_all}");
    ok(dir.path(), &["-c", "run.toml", "subsidy"]);
    assert!(!read(dir.path(), "sector-subsidy.csv").contains("Hospitals,"));
}

#[test]
fn reruns_and_thread_counts_are_byte_identical() {
    let dir = workspace(CONFIG);
    let files = ["sector-subsidy.csv", "location-subsidy.csv", "region-subsidy.csv", "calibration.csv"];
    let snapshot = |threads: &str| {
        ok(dir.path(), &["-c", "run.toml", "--threads", threads, "index"]);
        ok(dir.path(), &["-c", "run.toml", "--threads", threads, "subsidy"]);
        let mut all: Vec<Vec<u8>> = files.iter().map(|f| fs::read(dir.path().join("out").join(f)).unwrap()).collect();
        all.push(fs::read(dir.path().join("out/location-index.csv")).unwrap());
        all
    };
    let first = snapshot("1");
    assert_eq!(first, snapshot("1"));
    assert_eq!(first, snapshot("4"));
}

#[test]
fn fig2_reports_regime_switches() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(dir.path(), &["fig2", "--out", "out"]);
    assert!(stdout.contains("binding density 16"), "{stdout}");
    let switches = read(dir.path(), "fig2-switches.csv");
    let rows: Vec<&str> = switches.lines().skip(2).collect();
    assert_eq!(rows[0], "16,unconstrained,distanced");
    assert!(rows[1].starts_with("39.0625,distanced,telecom"), "{switches}");
    let curve = read(dir.path(), "fig2.csv");
    assert_eq!(curve.lines().count(), 2 + 200);
}

#[test]
fn fig2_without_telecom_has_one_switch() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["fig2", "--out", "out", "--no-telecom", "--points", "50"]);
    let switches = read(dir.path(), "fig2-switches.csv");
    assert_eq!(switches.lines().count(), 3, "{switches}");
    assert!(read(dir.path(), "fig2.csv").lines().skip(2).all(|l| l.contains(",,")));
}

#[test]
fn fig2_rejects_out_of_range_chi() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["fig2", "--out", "out", "--chi", "1.5"]).status.code(), Some(2));
}

#[test]
fn lowess_smooths_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("d,share,w\n");
    for i in 1..=30 {
        let x = i as f64;
        csv.push_str(&format!("{x},{},{}\n", 0.5 + 0.01 * x.ln(), 1 + i % 3));
    }
    fs::write(dir.path().join("pts.csv"), csv).unwrap();
    ok(
        dir.path(),
        &[
            "lowess", "--input", "pts.csv", "--x", "d", "--y", "share", "--weight", "w", "--log-x", "--output", "curve.csv",
        ],
    );
    let out = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
    let rows: Vec<(f64, f64)> = out
        .lines()
        .skip(2)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 100);
    // a straight line in ln x is reproduced by local-linear smoothing
    for (x, y) in rows {
        assert!((y - (0.5 + 0.01 * x)).abs() < 1e-12, "{x} {y}");
    }
}

#[test]
fn lowess_missing_column_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pts.csv"), "a,b\n1,2\n").unwrap();
    let out = run(dir.path(), &["lowess", "--input", "pts.csv", "--output", "c.csv"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stderr).unwrap().contains("density"));
}
