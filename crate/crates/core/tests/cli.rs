use std::fs;
use std::process::{Command, Output};

use mwcons::output::OUTPUT_FILES;

fn mwcons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwcons"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_prints_partition_and_gains() {
    let o = mwcons(&["check", "g1_leaderless"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("V1 = {1,2,5}, V2 = {3,4}"), "{text}");
    assert!(text.contains("null-space condition") && text.contains("holds"), "{text}");
    // first row of the gain table, within 1% of 6620
    let row = text.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
    let varpi: f64 = row.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!((varpi - 6620.0).abs() / 6620.0 < 0.01, "{row}");
}

#[test]
fn check_leader_follower_reports_leader_condition() {
    let o = mwcons(&["check", "g1_leader_follower"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("leader condition (sum of |B_il| positive definite): holds"), "{text}");
    assert!(text.contains("omega"), "{text}");
}

#[test]
fn params_prints_table_only() {
    let o = mwcons(&["params", "g1_leaderless"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 6, "{text}");
    assert!(!text.contains("partition"));
}

#[test]
fn run_writes_full_file_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = mwcons(&["run", "g1_leaderless", "--out", out.to_str().unwrap(), "--plots"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in OUTPUT_FILES {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    for f in ["states.svg", "controls.svg", "events.svg", "psi.svg"] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn run_is_byte_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = ["a", "b", "c"].iter().map(|p| dir.path().join(p)).collect();
    for (p, seed) in paths.iter().zip(["7", "7", "8"]) {
        let o = mwcons(&["run", "g1_leaderless", "--out", p.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success());
    }
    let read = |p: &std::path::Path| fs::read(p.join("trajectory.csv")).unwrap();
    assert_eq!(read(&paths[0]), read(&paths[1]));
    assert_ne!(read(&paths[0]), read(&paths[2]));
}

#[test]
fn compare_reports_both_modes() {
    let o = mwcons(&["compare", "g1_leader_follower"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("events"), "{text}");
    assert!(text.contains("1001 samples"), "{text}");
    assert!(text.contains("final-state difference"), "{text}");
}

#[test]
fn missing_scenario_fails_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let o = mwcons(&["run", "missing.toml", "--out", dir.path().to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("not found") && err.contains("missing.toml"), "{err}");
}

#[test]
fn invalid_scenario_fails_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = mwcons::scenario::bundled("g1_leaderless").unwrap().replace("rho = 0.9", "rho = 1.0");
    fs::write(&path, text).unwrap();
    let out = dir.path().join("out");
    let o = mwcons(&["run", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho"));
    assert!(!out.exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!mwcons(&[]).status.success());
    assert!(!mwcons(&["run", "g1_leaderless"]).status.success());
    assert!(!mwcons(&["frobnicate"]).status.success());
}
