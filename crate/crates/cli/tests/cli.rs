use std::path::Path;
use std::process::{Command, Output};

fn tlc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tlc")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn completed_run_exits_zero_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlc(&["run", "--scenario", "acc", "--method", "hocbf", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = json(&dir.path().join("metrics.json"));
    assert_eq!(metrics["completed"], true);
    assert!(!dir.path().join("fault.json").exists());
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, metrics);
}

#[test]
fn controller_fault_exits_two_with_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlc(&["run", "--scenario", "acc", "--method", "tlc", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    let fault = json(&dir.path().join("fault.json"));
    assert_eq!(fault["reason"]["kind"], "infeasible");
    assert!(dir.path().join("trajectory.csv").is_file());
    assert_eq!(json(&dir.path().join("metrics.json"))["completed"], false);
}

#[test]
fn unknown_override_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlc(&[
        "run", "--scenario", "acc", "--method", "tlc", "--set", "no_such_key=1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn config_file_with_unknown_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"acc": {"dt": 1.0, "typo": 2}}"#).unwrap();
    let out = tlc(&[
        "run", "--scenario", "acc", "--method", "tlc", "--config", cfg.to_str().unwrap(), "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn config_file_and_overrides_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"robot": {"t_end": 5.0}}"#).unwrap();
    let out_dir = dir.path().join("o");
    let out = tlc(&[
        "run", "--scenario", "robot", "--method", "hocbf", "--config", cfg.to_str().unwrap(), "--set",
        "x_o=30", "--out", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let echo = json(&out_dir.join("config.json"));
    assert_eq!(echo["params"]["x_o"], 30.0);
    assert_eq!(echo["params"]["t_end"], 5.0);
    assert!((json(&out_dir.join("metrics.json"))["t_final"].as_f64().unwrap() - 5.0).abs() < 1e-9);
}

#[test]
fn compare_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlc(&[
        "compare", "--out", dir.path().to_str().unwrap(), "--set", "t_end=5", "robot:hocbf", "robot:etlc",
    ]);
    assert!(matches!(code(&out), 0 | 2), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("hocbf") && text.contains("etlc"));
    assert!(dir.path().join("comparison.csv").is_file());
}

#[test]
fn compare_needs_two_requests_on_one_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    assert_eq!(code(&tlc(&["compare", "--out", d, "acc:tlc"])), 3);
    assert_eq!(code(&tlc(&["compare", "--out", d, "acc:tlc", "robot:tlc"])), 3);
    assert_eq!(code(&tlc(&["compare", "--out", d, "acc:nope", "acc:tlc"])), 3);
}

#[test]
fn per_request_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let out = tlc(&[
        "compare", "--out", dir.path().to_str().unwrap(), "acc:hocbf,dt=1", "acc:hocbf,dt=0.5",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cmp = json(&dir.path().join("comparison.json"));
    let counts: Vec<u64> = cmp["metrics"].as_array().unwrap().iter().map(|m| m["qp_count"].as_u64().unwrap()).collect();
    assert_eq!(counts, [40, 80]);
}

#[test]
fn verify_prints_a_table() {
    let out = tlc(&["verify"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}
