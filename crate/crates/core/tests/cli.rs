use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn prbp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prbp")).args(args).output().unwrap()
}

fn json_ok(args: &[&str]) -> Value {
    let out = prbp(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn assert_schema(name: &str, doc: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema").join(format!("{name}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errs: Vec<String> = v.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "{name}: {errs:?}");
}

#[test]
fn code_info_toy() {
    let v = json_ok(&["code-info", "toy_3_1"]);
    assert_schema("code-info", &v);
    assert_eq!(v["n"], 3);
    assert_eq!(v["k"], 1);
    assert!((v["rate"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn code_info_from_fixture_dir() {
    let dir = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy_3_1.alist");
    std::fs::copy(src, dir.path().join("rep3.alist")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_prbp"))
        .args(["code-info", "rep3"])
        .env("PRBP_FIXTURE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m"], 2);
}

#[test]
fn predict_ops_defaults() {
    let v = json_ok(&["predict-ops"]);
    assert_schema("predict-ops", &v);
    assert_eq!(v["prbp"]["per_symbol"]["multiplies"], 520);
    assert_eq!(v["prbp"]["per_symbol"]["adds"], 360);
    assert_eq!(v["turbo"]["per_symbol"]["multiplies"], 486);
    assert_eq!(v["turbo"]["per_symbol"]["adds"], 135);
    assert_eq!(v["per_iteration"]["bcjr"]["multiplies"], 18);
    assert_eq!(v["per_iteration"]["bcjr"]["adds"], 9);
    let v = json_ok(&["predict-ops", "--schedule", "3x(6+1)"]);
    assert_eq!(v["turbo"]["schedule"], "3x6");
}

#[test]
fn decode_high_snr_converges_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let v = json_ok(&["decode", "--snr", "7.5", "--seed", "3", "--trace", trace.to_str().unwrap()]);
    assert_schema("decode", &v);
    assert_eq!(v["converged"], true);
    assert_eq!(v["bit_errors"], 0);
    assert_eq!(v["transmitted"], v["hard_bits"]);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("iteration,"));
    assert_eq!(text.lines().count() as u64, 1 + v["iterations_used"].as_u64().unwrap());
}

#[test]
fn decode_turbo_and_memoryless() {
    for dec in ["turbo", "sumproduct-memoryless"] {
        let v = json_ok(&["decode", "--decoder", dec, "--snr", "8"]);
        assert_schema("decode", &v);
        assert_eq!(v["bit_errors"], 0, "{dec}");
    }
}

#[test]
fn show_config_applies_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"target": "1+0.5D", "seed": 9, "snr_db": [4.0, 5.0]}"#).unwrap();
    let v = json_ok(&["ber", "--show-config", "--config", cfg.to_str().unwrap(), "--seed", "10"]);
    assert_schema("config", &v);
    assert_eq!(v["target"], "1+0.5D");
    assert_eq!(v["seed"], 10);
    assert_eq!(v["snr_db"], serde_json::json!([4.0, 5.0]));
    let bare = json_ok(&["--show-config"]);
    assert_schema("config", &bare);
    assert_eq!(bare["code"], "code_2640_1320");
}

#[test]
fn ber_sweep_resume_and_threads() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let common = ["ber", "--code", "code_495_433", "--min-bit-errors", "20", "--max-codewords", "64", "--batch", "16"];
    let run = |dir: &Path, snr: &str, extra: &[&str]| {
        let mut args: Vec<&str> = common.to_vec();
        args.extend(["--snr", snr, "--out", dir.to_str().unwrap()]);
        args.extend(extra);
        json_ok(&args)
    };
    let meta = run(a.path(), "6,7", &["--threads", "1"]);
    assert_schema("ber", &meta);
    assert_eq!(meta["records"].as_array().unwrap().len(), 2);
    run(b.path(), "6,7", &["--threads", "2"]);
    let csv_a = std::fs::read(a.path().join("ber.csv")).unwrap();
    assert_eq!(csv_a, std::fs::read(b.path().join("ber.csv")).unwrap());
    let sidecar: Value = serde_json::from_slice(&std::fs::read(a.path().join("ber.json")).unwrap()).unwrap();
    assert_schema("ber", &sidecar);

    let c = tempfile::tempdir().unwrap();
    run(c.path(), "6", &[]);
    let resumed = run(c.path(), "6,7", &["--resume"]);
    assert_eq!(resumed["records"], meta["records"]);
    assert_eq!(std::fs::read(c.path().join("ber.csv")).unwrap(), csv_a);
}

#[test]
fn oracle_check_memoryless() {
    let v = json_ok(&["oracle-check", "--size", "8", "--count", "10", "--memoryless"]);
    assert_schema("oracle-check", &v);
    assert_eq!(v["lags"], serde_json::json!([]));
    assert!(v["max_marginal_error"].as_f64().unwrap() < 1e-8);
}

#[test]
fn exit_codes() {
    assert_eq!(prbp(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(prbp(&["decode", "--target", "1-Q"]).status.code(), Some(1));
    assert_eq!(prbp(&["decode", "--decoder", "viterbi"]).status.code(), Some(1));
    assert_eq!(prbp(&["--threads", "0", "predict-ops"]).status.code(), Some(1));
    assert_eq!(prbp(&["oracle-check", "--size", "40"]).status.code(), Some(1));
    let missing = prbp(&["code-info", "/nonexistent/code.alist"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
    assert_eq!(prbp(&["--help"]).status.code(), Some(0));
}
