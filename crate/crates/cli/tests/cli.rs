use std::path::Path;
use std::process::{Command, Output};

fn vertisync(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vertisync"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no '{key}' in output:\n{text}"))
}

#[test]
fn run_writes_artifacts_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &[
            "run",
            "--scenario",
            "la_morning",
            "--policy",
            "fcfs",
            "--seed",
            "7",
            "--out",
            "fc",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "violations"), "0");
    for f in [
        "run.csv",
        "fleet.csv",
        "requests.csv",
        "flights.csv",
        "cycles.csv",
        "queues.csv",
        "violations.csv",
        "travel_time_bins.csv",
        "metrics.txt",
    ] {
        assert!(tmp.path().join("fc").join(f).is_file(), "missing {f}");
    }
    let v = vertisync(
        &["verify-trace", "--scenario", "la_morning", "--trace", "fc"],
        tmp.path(),
    );
    assert!(v.status.success(), "{}", stderr(&v));
    // metrics recomputed from the CSVs match the run's own summary
    let summary = std::fs::read_to_string(tmp.path().join("fc/metrics.txt")).unwrap();
    assert_eq!(stdout(&v), summary);
}

#[test]
fn vertisync_run_is_safe() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &["run", "--scenario", "la_morning", "--seed", "7", "--out", "vs"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "violations"), "0");
}

#[test]
fn missing_network_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(&["run", "--network", "nope.toml", "--demand", "d.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("network config not found"), "{err}");
    let record: serde_json::Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(record["error"], "not_found");
}

#[test]
fn unknown_flags_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(&["run", "--scenario", "la_morning", "--sead", "1"], tmp.path());
    assert!(!o.status.success());
}

#[test]
fn region_reports_the_corridor_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &["region", "--scenario", "la_morning", "--grid", "3", "--out", "reg"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let theta: f64 = field(&out, "theta_per_tau").parse().unwrap();
    assert!((theta - 2.5).abs() < 1e-6, "{theta}");
    assert_eq!(field(&out, "truncated"), "false");
    let grid = std::fs::read_to_string(tmp.path().join("reg/region_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 9);
}

#[test]
fn region_rejects_a_zero_direction() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &["region", "--scenario", "example1", "--direction", "0,0,0,0,0,0,0,0"],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn region_along_two_crossing_pairs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &[
            "region",
            "--scenario",
            "example1",
            "--along",
            "(1,3);(2,4)",
            "--out",
            "reg",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let theta: f64 = field(&stdout(&o), "theta_per_step").parse().unwrap();
    // the two crossing pairs run together at full rate in one vector
    assert!((theta - 0.1).abs() < 1e-9, "{theta}");
}

#[test]
fn enumerate_writes_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &[
            "enumerate",
            "--scenario",
            "example1",
            "--all",
            "--max-active",
            "2",
            "--out",
            "v.csv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let n: usize = field(&stdout(&o), "vectors").parse().unwrap();
    let csv = std::fs::read_to_string(tmp.path().join("v.csv")).unwrap();
    assert_eq!(csv.lines().count(), n + 1);
    assert!(csv
        .lines()
        .any(|l| l.starts_with(|c: char| c.is_ascii_digit()) && l.contains(",0.1,0,0,0.1,0,0,0,0,")));
}

#[test]
fn sweep_single_point() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &[
            "sweep-fleet",
            "--scenario",
            "la_morning",
            "--policy",
            "fcfs",
            "--a-min",
            "32",
            "--a-max",
            "32",
            "--seeds",
            "2",
            "--out",
            "s.csv",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "plateau_fleet"), "32");
    assert!(std::fs::read_to_string(tmp.path().join("s.csv"))
        .unwrap()
        .starts_with("fleet,mean_peak_min"));
}

#[test]
fn strict_fleet_below_slot_count_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vertisync(
        &[
            "sweep-fleet",
            "--scenario",
            "la_morning",
            "--a-min",
            "4",
            "--a-max",
            "4",
            "--seeds",
            "1",
            "--strict-fleet",
            "--out",
            "s.csv",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("below the required"), "{}", stderr(&o));
}
