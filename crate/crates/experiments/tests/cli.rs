use std::fs;
use std::process::{Command, Output};

use dipbias::config::{GradCheckConfig, ResponseConfig};
use dipbias::{ExperimentConfig, ExperimentKind};

fn dipbias(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dipbias")).args(args).output().unwrap()
}

fn error_record(out: &Output) -> serde_json::Value {
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.trim()).unwrap_or_else(|_| panic!("stderr is not JSON: {stderr}"))
}

#[test]
fn grad_check_from_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new(ExperimentKind::GradCheck(GradCheckConfig {
        cases: 2,
        ..GradCheckConfig::default()
    }));
    cfg.out_dir = dir.path().join("ignored");
    let path = dir.path().join("cfg.json");
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let out_dir = dir.path().join("run");
    let out = dipbias(&[
        "grad-check",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--seeds",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("gradcheck.csv").exists());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"], serde_json::json!([4]));
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn mismatched_experiment_tag_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    let cfg = ExperimentConfig::new(ExperimentKind::Response(ResponseConfig::default()));
    fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let rec = error_record(&dipbias(&["grad-check", "--config", path.to_str().unwrap()]));
    assert_eq!(rec["error"], "config");
    assert!(rec["message"].as_str().unwrap().contains("upsample_response"));
}

#[test]
fn malformed_config_is_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    fs::write(&path, "{ \"experiment\": \"grad_check\", ").unwrap();
    let rec = error_record(&dipbias(&["grad-check", "--config", path.to_str().unwrap()]));
    assert_eq!(rec["error"], "json");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let rec = error_record(&dipbias(&["exp-1d", "--config", "/nonexistent/cfg.json"]));
    assert_eq!(rec["error"], "io");
}

#[test]
fn zero_workers_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let rec = error_record(&dipbias(&["upsample-response", "--workers", "0", "--out", dir.path().to_str().unwrap()]));
    assert_eq!(rec["error"], "config");
}
