//! End-to-end checks of the command line: exit codes, config-error pointers,
//! output shapes, and byte-level determinism of everything written to disk.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_eht-lab")
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn golden(name: &str) -> Value {
    let text = fs::read_to_string(config_path(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Golden stag hunt shrunk to a few short replications so command tests
/// finish in milliseconds.
fn small_stag() -> Value {
    let mut cfg = golden("stag_hunt.json");
    cfg["run"]["epochs"] = json!(5);
    cfg["run"]["epoch_length"] = json!(50);
    cfg["run"]["replications"] = json!(2);
    let top = cfg.as_object_mut().unwrap();
    top.remove("sweep");
    top.remove("outputs");
    cfg
}

fn write_config(dir: &TempDir, cfg: &Value) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .env_remove("EHT_STATE_CAP")
        .output()
        .unwrap()
}

fn exit_code(output: &Output) -> i32 {
    output.status.code().expect("process terminated by signal")
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn read(dir: &TempDir, sub: &str, name: &str) -> String {
    fs::read_to_string(dir.path().join(sub).join(name)).unwrap()
}

#[test]
fn golden_configs_round_trip_through_the_schema() {
    for name in ["stag_hunt.json", "bos_symmetric.json", "bos_asymmetric.json"] {
        let text = fs::read_to_string(config_path(name)).unwrap();
        let parsed = eht_lab::config::parse(&text).unwrap();
        let reserialized = serde_json::to_string(&parsed).unwrap();
        let reparsed = eht_lab::config::parse(&reserialized).unwrap();
        assert_eq!(parsed, reparsed, "{name} drifts through a round trip");
    }
}

#[test]
fn malformed_payoff_table_points_at_the_offending_entry() {
    let dir = TempDir::new().unwrap();
    let mut cfg = golden("stag_hunt.json");
    cfg["game"]["payoffs"][0] = json!([4.0, 0.0, 3.0]);
    let path = write_config(&dir, &cfg);
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(
        stderr(&out).contains("/game/payoffs/0"),
        "missing pointer: {}",
        stderr(&out)
    );
}

#[test]
fn syntactically_broken_json_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, "{ \"game\": ").unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn sweep_grids_need_two_distinct_interior_points() {
    let dir = TempDir::new().unwrap();
    let mut cfg = golden("stag_hunt.json");
    cfg["sweep"]["xi_grid"] = json!([0.1]);
    let path = write_config(&dir, &cfg);
    let out = run(&["sweep", path.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("/sweep/xi_grid"), "{}", stderr(&out));

    cfg["sweep"]["xi_grid"] = json!([0.5, 1.0]);
    let path = write_config(&dir, &cfg);
    let out = run(&["sweep", path.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("/sweep/xi_grid"), "{}", stderr(&out));
}

#[test]
fn zero_epoch_simulation_writes_empty_outputs() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_stag();
    cfg["run"]["epochs"] = json!(0);
    let path = write_config(&dir, &cfg);
    let out = run(&["simulate", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("agreement: skipped"));
    assert_eq!(read(&dir, "out", "trajectory.ndjson"), "");
    assert_eq!(
        read(&dir, "out", "trajectory.csv"),
        "epoch,state_before,state_after,consistent,stable\n"
    );
    assert_eq!(
        read(&dir, "out", "occupancy.csv"),
        "replication,seed,initial_state,final_state,occupancy_stable,occupancy_consistent\n"
    );
    let report: Value = serde_json::from_str(&read(&dir, "out", "simulate_report.json")).unwrap();
    assert!(report["occupancy_stable"].is_null());
    assert!(report["agreement_gap"].is_null());
}

#[test]
fn simulation_outputs_are_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, &small_stag());
    for sub in ["a", "b"] {
        let out = run(&["simulate", path.to_str().unwrap(), "--out", dir.path().join(sub).to_str().unwrap()]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    for name in ["trajectory.ndjson", "trajectory.csv", "occupancy.csv", "simulate_report.json"] {
        assert_eq!(read(&dir, "a", name), read(&dir, "b", name), "{name} differs between identical runs");
    }
}

#[test]
fn seed_override_changes_the_sample_path() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, &small_stag());
    for (sub, seed) in [("a", "1"), ("b", "2")] {
        let out = run(&[
            "simulate",
            path.to_str().unwrap(),
            "--out",
            dir.path().join(sub).to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    }
    assert_ne!(read(&dir, "a", "occupancy.csv"), read(&dir, "b", "occupancy.csv"));
}

#[test]
fn state_cap_env_var_limits_the_state_space() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, &small_stag());
    let out = Command::new(binary())
        .args(["analyze", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()])
        .env("EHT_STATE_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 3, "{}", stderr(&out));
}

#[test]
fn zero_threads_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = write_config(&dir, &small_stag());
    let out = run(&["analyze", path.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn constant_payoffs_warn_without_failing() {
    let dir = TempDir::new().unwrap();
    let mut cfg = small_stag();
    cfg["game"]["payoffs"] = json!([[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, 1.0, 1.0]]);
    cfg["run"]["epochs"] = json!(0);
    cfg["parameters"].as_object_mut().unwrap().remove("epsilon");
    let path = write_config(&dir, &cfg);
    let out = run(&["verify", path.to_str().unwrap(), "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&read(&dir, "out", "verify_report.json")).unwrap();
    assert_eq!(report["pass"], json!(true));
    assert!(report["potential_route_gap"].is_null());
    let warnings = report["warnings"].as_array().unwrap().iter().map(|w| w.as_str().unwrap()).collect::<Vec<_>>();
    assert!(
        warnings.iter().any(|w| w.contains("escape condition fails")),
        "warnings: {warnings:?}"
    );
}

#[test]
fn analyze_reports_the_selected_state() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "analyze",
        config_path("stag_hunt.json").to_str().unwrap(),
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_str(&read(&dir, "out", "report.json")).unwrap();
    assert_eq!(report["stable"], json!([24]));
    // One CSV row per consistent state plus the header.
    let lines = read(&dir, "out", "states.csv").lines().count();
    assert_eq!(lines as u64, report["num_consistent"].as_u64().unwrap() + 1);
}
