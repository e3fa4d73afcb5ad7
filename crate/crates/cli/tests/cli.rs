//! End-to-end subcommand tests: spec'd JSON payload fields, exit codes,
//! defaulting, reproducibility, and the degradation notices.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use shapestore_cli::{
    cmd_analyze, cmd_certify, cmd_drift_check, cmd_simulate, cmd_validate, DriftCases,
    SimOverrides,
};

const PAIRS3: &str = r#"{"n":3,"neighborhoods":[[0,1],[0,2],[1,2]],"rates":["1/3","1/3","1/3"]}"#;
const PAIRS3_BOUNDARY: &str =
    r#"{"n":3,"neighborhoods":[[0,1],[0,2],[1,2]],"rates":["2/3","1/6","1/6"]}"#;
const NESTED3: &str = r#"{"n":3,"neighborhoods":[[0],[0,1,2]],"rates":["1/2","1/2"]}"#;
const SPLIT4: &str = r#"{"n":4,"neighborhoods":[[0,1],[2,3]],"rates":["1/2","1/2"]}"#;
const SINGLE2: &str = r#"{"n":2,"neighborhoods":[[0,1]],"rates":["1"]}"#;

struct Tmp {
    dir: tempfile::TempDir,
}

impl Tmp {
    fn new() -> Self {
        Tmp {
            dir: tempfile::tempdir().expect("tempdir"),
        }
    }

    fn file(&self, name: &str, content: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, content).expect("write");
        path
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }
}

fn ts() -> Option<String> {
    Some("2026-01-01T00:00:00Z".to_owned())
}

#[test]
fn analyze_positive_instance() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", PAIRS3);
    let result = cmd_analyze(&net, ts()).unwrap();
    assert_eq!(result.exit, 0);
    let p = &result.payload;
    assert_eq!(p["connected"], true);
    assert_eq!(p["status"], "POSITIVE");
    assert_eq!(p["erp_exists"], true);
    assert_eq!(p["serp_exists"], true);
    assert_eq!(p["origin_in_ri_d"], true);
    assert_eq!(p["slack"], "1/3");
    assert!(p["allocation"].is_array());
    assert!(p["certificate"].is_null());
}

#[test]
fn analyze_infeasible_instance_has_certificate() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", NESTED3);
    let result = cmd_analyze(&net, ts()).unwrap();
    assert_eq!(result.exit, 0);
    let p = &result.payload;
    assert_eq!(p["status"], "INFEASIBLE");
    assert_eq!(p["slack"], "-1/6");
    assert_eq!(p["erp_exists"], false);
    assert_eq!(p["serp_exists"], false);
    let b: Vec<String> = p["certificate"]["b"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(b, vec!["2/3", "-1/3", "-1/3"]);
}

#[test]
fn analyze_disconnected_net_warns() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", SPLIT4);
    let result = cmd_analyze(&net, ts()).unwrap();
    let p = &result.payload;
    assert_eq!(p["connected"], false);
    assert!(p["warning"]
        .as_str()
        .unwrap()
        .contains("impossible"));
}

#[test]
fn analyze_boundary_is_nonneg_only() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", PAIRS3_BOUNDARY);
    let result = cmd_analyze(&net, ts()).unwrap();
    let p = &result.payload;
    assert_eq!(p["status"], "NONNEG_ONLY");
    assert_eq!(p["slack"], "0");
    assert_eq!(p["serp_exists"], false);
    assert_eq!(p["erp_exists"], true);
    // Witness J* = {0}: b = (1/3, 1/3, -2/3).
    let b: Vec<String> = p["certificate"]["b"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_owned())
        .collect();
    assert_eq!(b, vec!["1/3", "1/3", "-2/3"]);
}

#[test]
fn validate_reports_violations_with_exit_1() {
    let tmp = Tmp::new();
    let bad = tmp.file(
        "bad.json",
        r#"{"n":2,"neighborhoods":[[0]],"rates":["1"]}"#,
    );
    let result = cmd_validate(&bad, ts()).unwrap();
    assert_eq!(result.exit, 1);
    assert_eq!(result.payload["valid"], false);
    let violations = result.payload["violations"].as_array().unwrap();
    assert!(violations
        .iter()
        .any(|v| v.as_str().unwrap().contains("cover node 1")));

    let good = tmp.file("good.json", PAIRS3);
    let result = cmd_validate(&good, ts()).unwrap();
    assert_eq!(result.exit, 0);
    assert_eq!(result.payload["valid"], true);
}

#[test]
fn drift_check_cases_and_sweep() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", PAIRS3);
    let cases = DriftCases::Explicit(vec![vec![2, 1, 0], vec![4, 0, 0], vec![3, 3, 3]]);
    let result = cmd_drift_check(&net, r#"{"policy":"jsq"}"#, &cases, ts()).unwrap();
    let records = result.payload["cases"].as_array().unwrap();
    assert_eq!(records[0]["delta_f"], "-2/3");
    assert_eq!(records[0]["closed_form"], "-2/3");
    assert_eq!(records[0]["match"], true);
    assert_eq!(records[0]["jump_bound_ok"], true);
    assert_eq!(records[1]["delta_f"], "-2");
    // Balanced case: jump bound hypothesis fails, reported as null.
    assert_eq!(records[2]["jump_bound_ok"], serde_json::Value::Null);
    assert_eq!(result.payload["all_match"], true);

    let result = cmd_drift_check(
        &net,
        r#"{"policy":"pserp","epsilon":"1/12"}"#,
        &DriftCases::Explicit(vec![vec![2, 1, 0]]),
        ts(),
    )
    .unwrap();
    assert_eq!(result.payload["cases"][0]["delta_f"], "0");
    assert_eq!(result.payload["cases"][0]["match"], true);

    // Sweep: 100 random cases, everything matches the closed forms.
    let sweep = DriftCases::Sweep {
        count: 100,
        seed: 7,
        max_load: 20,
    };
    let result = cmd_drift_check(&net, r#"{"policy":"jsq"}"#, &sweep, ts()).unwrap();
    assert_eq!(result.payload["cases"].as_array().unwrap().len(), 100);
    assert_eq!(result.payload["all_match"], true);
    assert_eq!(result.payload["oracle_only"], false);
}

#[test]
fn drift_check_degrades_on_infeasible_net() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", NESTED3);
    let result = cmd_drift_check(
        &net,
        r#"{"policy":"pserp"}"#,
        &DriftCases::Explicit(vec![vec![2, 1, 0]]),
        ts(),
    )
    .unwrap();
    // Explicit notice, exit 0, oracle-only records.
    assert_eq!(result.exit, 0);
    assert_eq!(result.payload["degraded"], true);
    assert_eq!(result.payload["oracle_only"], true);
    assert!(!result.payload["notices"].as_array().unwrap().is_empty());
    assert!(result.payload["cases"][0]["closed_form"].is_null());
}

#[test]
fn simulate_defaults_and_reproducibility() {
    let tmp = Tmp::new();
    tmp.file("net.json", SINGLE2);
    let config = tmp.file(
        "sim.json",
        r#"{"net_file":"net.json","policy":{"policy":"jsq"},"max_steps":10,"replicas":1,"record_every":1}"#,
    );
    let result = cmd_simulate(&config, &SimOverrides::default(), ts()).unwrap();
    assert_eq!(result.exit, 0);
    let p = &result.payload;
    // Missing seed defaults to 0 and lands in the manifest.
    assert_eq!(p["manifest"]["parameters"]["sim"]["seed"], 0);
    // Deterministic alternation: five returns of exactly 2.
    assert_eq!(p["tau_histogram"]["2"], 5);
    assert_eq!(p["tau_histogram"].as_object().unwrap().len(), 1);

    let again = cmd_simulate(&config, &SimOverrides::default(), ts()).unwrap();
    assert_eq!(
        serde_json::to_string(&result.payload).unwrap(),
        serde_json::to_string(&again.payload).unwrap()
    );
    assert_eq!(result.files, again.files);
    // CSV sidecar references the manifest digest.
    assert!(result.files[0].1.starts_with("# manifest_sha256="));
}

#[test]
fn simulate_applies_overrides() {
    let tmp = Tmp::new();
    tmp.file("net.json", PAIRS3);
    let config = tmp.file(
        "sim.json",
        r#"{"net_file":"net.json","policy":{"policy":"serp"},"max_steps":3000,"replicas":2,"seed":5}"#,
    );
    let overrides = SimOverrides {
        seed: Some(9),
        replicas: Some(3),
        steps: Some(1200),
    };
    let result = cmd_simulate(&config, &overrides, ts()).unwrap();
    let sim = &result.payload["manifest"]["parameters"]["sim"];
    assert_eq!(sim["seed"], 9);
    assert_eq!(sim["replicas"], 3);
    assert_eq!(sim["max_steps"], 1200);
    assert_eq!(result.payload["replicas"].as_array().unwrap().len(), 3);
    // Conservation: loads sum to steps; shapes are reported exactly.
    for replica in result.payload["replicas"].as_array().unwrap() {
        assert!(replica["final_shape"].as_array().unwrap().len() == 3);
    }
}

#[test]
fn certify_boundary_and_sampled_drifts() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", PAIRS3_BOUNDARY);
    let result = cmd_certify(&net, r#"{"policy":"jsq"}"#, 50, 3, 15, ts()).unwrap();
    let p = &result.payload;
    assert_eq!(p["status"], "NONNEG_ONLY");
    let b: Vec<&str> = p["b"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(b, ["1/3", "1/3", "-2/3"]);
    assert_eq!(p["samples"].as_array().unwrap().len(), 50);
    // Every sampled drift value is a non-negative exact rational.
    let min: &str = p["min_drift_value"].as_str().unwrap();
    assert!(!min.starts_with('-'));

    let positive = tmp.file("pos.json", PAIRS3);
    let err = cmd_certify(&positive, r#"{"policy":"jsq"}"#, 10, 0, 10, ts()).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.message().contains("positive solution exists"));
}

#[test]
fn binary_exit_codes_and_output_dir() {
    let tmp = Tmp::new();
    let net = tmp.file("net.json", PAIRS3);
    let bad = tmp.file("bad.json", r#"{"n":2,"neighborhoods":[[0]],"rates":["1"]}"#);
    let out = tmp.path().join("out");

    let ok = Command::new(env!("CARGO_BIN_EXE_shapestore"))
        .args(["analyze", "--net"])
        .arg(&net)
        .args(["--timestamp", "T0", "--output-dir"])
        .arg(&out)
        .output()
        .expect("binary runs");
    assert!(ok.status.success());
    let stdout = String::from_utf8(ok.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&stdout).expect("stdout is JSON");
    assert_eq!(parsed["status"], "POSITIVE");
    assert!(out.join("analyze.json").exists());

    let invalid = Command::new(env!("CARGO_BIN_EXE_shapestore"))
        .args(["validate", "--net"])
        .arg(&bad)
        .output()
        .expect("binary runs");
    assert_eq!(invalid.status.code(), Some(1));

    let usage = Command::new(env!("CARGO_BIN_EXE_shapestore"))
        .args(["analyze", "--net", "/nonexistent/net.json"])
        .output()
        .expect("binary runs");
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn simulate_performance_smoke() {
    // The symmetric JSQ smoke run finishes well inside its budget.
    let tmp = Tmp::new();
    tmp.file("net.json", PAIRS3);
    let config = tmp.file(
        "sim.json",
        r#"{"net_file":"net.json","policy":{"policy":"jsq"},"max_steps":10000,"replicas":4,"seed":0}"#,
    );
    let start = std::time::Instant::now();
    let result = cmd_simulate(&config, &SimOverrides::default(), ts()).unwrap();
    assert!(start.elapsed().as_secs_f64() < 5.0);
    assert_eq!(result.exit, 0);
}
