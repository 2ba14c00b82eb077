//! End-to-end checks of the command-line surface: exit codes, schema
//! rejection, artifact emission, determinism across thread counts.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fhl"))
}

fn repo_config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

#[test]
fn missing_config_is_usage_error() {
    let out = run(&["verify"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn malformed_json_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
    assert!(!out.stderr.is_empty());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("extra.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("trivial.json")).unwrap(),
    )
    .unwrap();
    cfg["model"]["mystery_knob"] = serde_json::json!(1.0);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn inconsistent_declared_constants_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("badk.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("trivial.json")).unwrap(),
    )
    .unwrap();
    cfg["model"]["drift"]["lipschitz"] = serde_json::json!(3.0);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(64));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("lipschitz"), "stderr: {err}");
}

#[test]
fn trivial_config_passes_with_exit_zero() {
    let cfg = repo_config("trivial.json");
    let out = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["failures"], 0);
}

#[test]
fn constants_bound_scales_with_separation_squared() {
    let cfg = repo_config("reference.json");
    let out = run(&["constants", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let details = &report["checks"][0]["details"];
    let rate = details["bundle"]["majorant"]["rate"].as_f64().unwrap();
    let bound = details["bound_at_run_points"].as_f64().unwrap();
    // |x - y| = 1/2 in the reference config.
    assert!((bound - rate * 0.25).abs() < 1e-9 * rate);
    assert_eq!(details["bundle"]["majorant"]["c_dbl_prime"].as_f64().unwrap(), 0.0);
}

#[test]
fn couple_emits_trace_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = repo_config("determinism.json");
    let out = run(&[
        "couple",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(header, "t,x0,y0,gap,zeta,u0");
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("meta.json").exists());
}

#[test]
fn sample_emits_paths_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("determinism.json")).unwrap(),
    )
    .unwrap();
    cfg["run"]["n_paths"] = serde_json::json!(3);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&[
        "sample",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(dir.path().join("paths.csv")).unwrap();
    assert!(csv.starts_with("path,t,x0\n"));
    // Three paths, 68 nodes each (64 cells + 3 refinement nodes + endpoint).
    assert_eq!(csv.lines().count(), 1 + 3 * 68);
}

#[test]
fn hard_failure_exits_two() {
    // An unreachable terminal-gap tolerance turns the (otherwise passing)
    // energy check into a hard failure.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fail.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("determinism.json")).unwrap(),
    )
    .unwrap();
    cfg["run"]["checks"] = serde_json::json!(["energy"]);
    cfg["run"]["gap_tol"] = serde_json::json!(1e-30);
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["failures"], 1);
}

#[test]
fn inconclusive_only_exits_three() {
    // At x = y with a nearly flat test function the Jensen gap sits inside
    // the Monte Carlo noise band; this seed lands on a slightly negative
    // margin, which must be reported as inconclusive, never as pass.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inconclusive.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("trivial.json")).unwrap(),
    )
    .unwrap();
    cfg["coupling"]["grid_cells"] = serde_json::json!(32);
    cfg["coupling"]["refine_levels"] = serde_json::json!(2);
    cfg["run"]["n_paths"] = serde_json::json!(120);
    cfg["run"]["seed"] = serde_json::json!(1);
    cfg["run"]["x"] = serde_json::json!([0.2]);
    cfg["run"]["y"] = serde_json::json!([0.2]);
    cfg["run"]["checks"] = serde_json::json!(["log-harnack"]);
    cfg["run"]["test_function"] =
        serde_json::json!({"family": "gauss_bump", "floor": 0.5, "center": [30.0], "width": 60.0});
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&["verify", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["summary"]["inconclusive"], 1);
    assert_eq!(report["summary"]["failures"], 0);
}

#[test]
fn invariant_exports_measure_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inv.json");
    let mut cfg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(repo_config("determinism.json")).unwrap(),
    )
    .unwrap();
    cfg["invariant"] =
        serde_json::json!({"x0": [0.0], "n_steps": 1, "n_chains": 16, "entropy_cost": false});
    cfg["output"] = serde_json::json!({"csv": true});
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out = run(&[
        "invariant",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("measure.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 16);
    // A single step carries no invariance information; the verdict is a
    // skip, not a pass or failure.
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let inv = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "invariance")
        .unwrap();
    assert_eq!(inv["verdict"], "skipped");
}

#[test]
fn seed_override_changes_the_report() {
    let cfg = repo_config("determinism.json");
    let a = run(&["verify", "--config", cfg.to_str().unwrap()]);
    let b = run(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "999"]);
    assert_ne!(a.stdout, b.stdout);
}
