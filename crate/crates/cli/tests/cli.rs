//! End-to-end runs of the `qnls` binary.

use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn run(args: &[&str], config: Option<&str>) -> (i32, Value) {
    let dir = tempfile::tempdir().unwrap();
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qnls"));
    cmd.args(args);
    if let Some(text) = config {
        let path = dir.path().join("config.json");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(&path);
    }
    let out = cmd.output().unwrap();
    let body: Value = serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)));
    (out.status.code().unwrap(), body)
}

const SINGLE: &str = r#"{"amplitudes": [{"j": 0, "re": "1/2", "im": "1/4"}], "order": 3}"#;

#[test]
fn single_mode_counterterms() {
    let (code, body) = run(&["compute"], Some(SINGLE));
    assert_eq!(code, 0, "{body}");
    let eta = &body["result"]["eta"];
    assert_eq!(eta[0]["support"]["0"], "-25/256");
    assert_eq!(eta[1]["support"]["0"], "0");
    assert_eq!(eta[2]["support"]["0"], "0");
    assert_eq!(body["result"]["residual"]["verdict"], "exact-zero");
}

#[test]
fn rational_runs_are_reproducible() {
    let config = r#"{"amplitudes": [{"j": 0, "re": "1/2"}, {"j": 1, "re": "1/3", "im": "-1/5"}], "order": 2,
        "frequency": {"kind": "potential", "values": {"0": "1/97", "1": "-3/101", "2": "2/89"}}}"#;
    let (code, first) = run(&["compute"], Some(config));
    assert_eq!(code, 0, "{first}");
    assert_eq!(first["result"]["residual"]["verdict"], "exact-zero");
    // Rerunning from the echoed configuration reproduces the report byte for byte.
    let echoed = first["config"].to_string();
    let (_, second) = run(&["compute", "--sequential"], Some(&echoed));
    let mut expected = first.clone();
    expected["config"]["sequential"] = Value::Bool(true);
    assert_eq!(expected.to_string(), second.to_string());
}

#[test]
fn float_mode_residual_within_tolerance() {
    let (code, body) = run(&["residual", "--mode", "float"], Some(SINGLE));
    assert_eq!(code, 0, "{body}");
    assert_eq!(body["result"]["residual"]["verdict"], "within-tolerance");
}

#[test]
fn divisor_violation_exits_with_witness() {
    let config = r#"{"amplitudes": [{"j": 0, "re": "1/2"}, {"j": 1, "re": "1/3"}], "order": 1, "window": 5,
        "frequency": {"kind": "potential", "values": {"2": -2}}}"#;
    let (code, body) = run(&["compute"], Some(config));
    assert_eq!(code, 2);
    assert_eq!(body["kind"], "divisor_too_small");
    assert_eq!(body["witness"]["j"], 2);
    assert_eq!(body["witness"]["nu"], "0:-1,1:2");
}

#[test]
fn configuration_errors_exit_one() {
    let (code, body) = run(&["compute"], Some(r#"{"ordr": 2}"#));
    assert_eq!((code, body["kind"].as_str()), (1, Some("config")));
    let (code, _) = run(&["compute", "--order", "40"], Some(SINGLE));
    assert_eq!(code, 1);
}

#[test]
fn free_frequencies_are_resonant() {
    let (code, body) = run(&["bryuno", "--window", "3"], None);
    assert_eq!(code, 0);
    assert_eq!(body["result"]["verdict"], "resonant");
    let w = body["result"]["witness"].as_str().unwrap();
    assert!(w == "-1:1,1:-1" || w == "-1:-1,1:1", "{w}");
}

#[test]
fn bryuno_sums_and_schedule_override() {
    let config = r#"{"frequency": {"kind": "potential", "values": {"-3": "0.0123", "-2": "-0.0471", "-1": "0.0817",
        "0": "0.1313", "1": "-0.1111", "2": "0.0377", "3": "-0.0219"}}, "bryuno": {"radii": [1.0, 1.5, 3.0]}}"#;
    let (code, body) = run(&["bryuno", "--window", "3"], Some(config));
    assert_eq!(code, 0, "{body}");
    let r = &body["result"];
    assert_eq!(r["schedule"]["radii"], serde_json::json!([1.0, 1.5, 3.0]));
    let sums = r["bryuno_partial_sums"].as_array().unwrap();
    assert_eq!(sums.len(), 2);
    assert!(sums.iter().all(|s| s.as_f64().unwrap().is_finite()));
}

#[test]
fn single_mode_asymptotics() {
    let config = r#"{"amplitudes": [{"j": 0, "re": 0.3}], "order": 1, "eps": 0.01,
        "asympt": {"probe_start": 3, "probe_end": 20, "depth": 2}}"#;
    let (code, body) = run(&["asympt"], Some(config));
    assert_eq!(code, 0, "{body}");
    let a0 = body["result"]["a0"].as_f64().unwrap();
    let a1 = body["result"]["a1"].as_f64().unwrap();
    assert!((a0 + 3.0 * 0.01 * 0.3f64.powi(4)).abs() < 1e-15);
    assert!(a1.abs() < 1e-12);
}

#[test]
fn compatibility_and_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = r#"{"amplitudes": [{"j": 0, "re": 0.3}, {"j": 1, "re": 0.1, "im": 0.1}], "order": 1, "eps": 0.05,
        "compat": {"depth": 2, "potential": {"1": 0.01, "-2": -0.02}}}"#;
    let (code, body) = run(&["compat", "--out", out.to_str().unwrap()], Some(config));
    assert_eq!(code, 0, "{body}");
    assert_eq!(body["result"]["converged"], true);
    assert!(Path::new(&out).join("trace.csv").exists());
    assert!(Path::new(&out).join("report.json").exists());
}

#[test]
fn measure_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"{"measure": {"samples": 100, "gammas": [0.02, 0.04]}}"#;
    let (code, body) = run(&["measure", "--seed", "9", "--out", dir.path().to_str().unwrap()], Some(config));
    assert_eq!(code, 0, "{body}");
    let csv = std::fs::read_to_string(dir.path().join("measure.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("gamma,failures,samples,fraction,ci_low,ci_high"));
    assert_eq!(lines.count(), 2);
    assert_eq!(body["seed"], 9);
}

#[test]
fn default_oracle_suite_is_green() {
    let (code, body) = run(&["oracle"], None);
    assert_eq!(code, 0, "{body}");
    assert_eq!(body["result"]["all_passed"], true);
    assert_eq!(body["result"]["suites"][0]["instances"], 100_000);
}
