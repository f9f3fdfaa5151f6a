use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_lagcov");

const SMALL: &str = r#"
schema_version = 1
seed = 5

[grid]
d = 8

[model]
kind = "far"
ar = [{ type = "gaussian", bandwidth = 0.1, opnorm = 0.5 }]
cross = { theta = { type = "gaussian", bandwidth = 0.2, opnorm = 0.7 } }

[experiment]
sample_sizes = [60]
lags = [0, 2]
m = [1, 2]
n = [1]
replications = 12

[bounds]
moment_replications = 200
horizon = 12
"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn lagcov(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout_of(args: &[&str]) -> Vec<u8> {
    let out = lagcov(args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

#[test]
fn simulate_writes_a_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out_dir = dir.path().join("out");
    let out = lagcov(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(out_dir.join("simulate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,series,v0,v1,v2,v3,v4,v5,v6,v7");
    assert_eq!(text.lines().count(), 1 + 2 * 60);
}

#[test]
fn estimate_rows_cover_every_block() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let text = String::from_utf8(stdout_of(&["estimate", "--config", cfg.to_str().unwrap()])).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("sample_size,h,m,n,n_eff,row,c0,"));
    // n = 1 rows of d values for each of the four cells
    assert_eq!(text.lines().count(), 1 + 4 * 8);
}

#[test]
fn verify_passes_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let c = cfg.to_str().unwrap();
    let serial = stdout_of(&["verify", "--config", c, "--jobs", "1"]);
    let parallel = stdout_of(&["verify", "--config", c, "--jobs", "4"]);
    assert_eq!(serial, parallel);
    let text = String::from_utf8(serial.clone()).unwrap();
    assert!(text.lines().next().unwrap().starts_with("sample_size,lag,m,n,n_eff,kappa_prime,nmse,se,formula,bound"));
    assert!(text.lines().skip(1).all(|l| l.contains(",true,")));
    let reseeded = stdout_of(&["verify", "--config", c, "--seed", "6"]);
    assert_ne!(serial, reseeded);
}

#[test]
fn json_reports_parse() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let raw = stdout_of(&["bounds", "--config", cfg.to_str().unwrap(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&raw).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["rows"][0]["formula"], "xi_cross");
    assert_eq!(v["rows"][0]["provenance"], "estimated");
    assert_eq!(v["rows"][0]["tail_rule"], "geometric");
}

#[test]
fn user_caps_are_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("horizon = 12", "horizon = 12\nnu4_x = 3.0");
    let cfg = write_config(dir.path(), &text);
    let out = String::from_utf8(stdout_of(&["bounds", "--config", cfg.to_str().unwrap()])).unwrap();
    assert!(out.lines().skip(1).all(|l| l.contains("user_capped")));
}

#[test]
fn eigen_and_ywfit_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("sample_sizes = [60]", "sample_sizes = [60, 240]"));
    let c = cfg.to_str().unwrap();
    let eigen = String::from_utf8(stdout_of(&["eigen", "--config", c])).unwrap();
    assert!(eigen.starts_with("sample_size,m,replication,j,lambda,lambda_hat"));
    let yw = String::from_utf8(stdout_of(&["ywfit", "--config", c, "--format", "json"])).unwrap();
    let v: serde_json::Value = serde_json::from_str(&yw).unwrap();
    assert_eq!(v["trend"].as_array().unwrap().len(), 2);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = lagcov(&["verify", "--config", dir.path().join("nope.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let no_config = lagcov(&["bounds"]);
    assert_eq!(no_config.status.code(), Some(2));
    let bad = write_config(dir.path(), "schema_version = 1\n[model]\nkind = \"nonsense\"\n");
    assert_eq!(lagcov(&["simulate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(lagcov(&["suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(lagcov(&["frobnicate"]).status.code(), Some(2));
    let degenerate = write_config(dir.path(), "schema_version = 1\n[grid]\nd = 4\n[model]\nkind = \"degenerate\"\n");
    assert_eq!(lagcov(&["bounds", "--config", degenerate.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    // a cap far below the true fourth moment makes the bound too small to hold
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("horizon = 12", "horizon = 12\nnu4_x = 0.05\nnu4_y = 0.05");
    let cfg = write_config(dir.path(), &text);
    let out = lagcov(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));
}

#[test]
fn closed_form_suite_passes() {
    let out = lagcov(&["suite", "bounds-closed-form", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["suite"], "bounds-closed-form");
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));
}
