use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn irb_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irb-lab"))
        .args(args)
        .env("IRB_LAB_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_RB: &str = r#"{"noise": {}, "rb": {"lengths": [2, 8, 32, 128], "num_seeds": 4}}"#;

#[test]
fn noiseless_rb_has_unit_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SMALL_RB);
    let out = irb_lab(&[
        "rb",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
        "--seed",
        "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("rb.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["command"], "rb");
    assert_eq!(report["seed"], 3);
    assert_eq!(report["results"]["kind"], "rb");
    let alpha = report["results"]["fit"]["alpha"].as_f64().unwrap();
    assert!(alpha >= 1.0 - 1e-6, "alpha = {alpha}");
    let csv = std::fs::read_to_string(dir.path().join("rb.csv")).unwrap();
    assert!(csv.starts_with("x,y,y_err,series\n"));
}

#[test]
fn report_as_config_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"rb": {"lengths": [2, 8, 32, 64], "num_seeds": 3, "shots": 500}}"#,
    );
    let out = irb_lab(&["rb", "--config", &cfg, "--out", first.to_str().unwrap(), "--seed", "11"]);
    assert!(out.status.success());
    let report = first.join("rb.json");
    let out = irb_lab(&[
        "rb",
        "--config",
        report.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = read_json(&report);
    let b = read_json(&second.join("rb.json"));
    assert_eq!(a["results"], b["results"]);
    assert_eq!(a["seed"], b["seed"]);
    assert_eq!(
        std::fs::read(first.join("rb.csv")).unwrap(),
        std::fs::read(second.join("rb.csv")).unwrap()
    );
}

#[test]
fn bad_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "unknown.json", r#"{"rb": {"lenghts": [2]}}"#);
    let out = irb_lab(&["rb", "--config", &unknown]);
    assert_eq!(out.status.code(), Some(2));
    let invalid = write(dir.path(), "invalid.json", r#"{"device": {"t1": 0.0}}"#);
    assert_eq!(irb_lab(&["irb", "--config", &invalid]).status.code(), Some(2));
    assert_eq!(
        irb_lab(&["rb", "--config", "/nonexistent/cfg.json"]).status.code(),
        Some(2)
    );
    assert_eq!(irb_lab(&["rb", "--shots", "0"]).status.code(), Some(2));
}

#[test]
fn print_schema_lists_sections() {
    let out = irb_lab(&["--print-schema"]);
    assert!(out.status.success());
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    let props = schema["properties"].as_object().unwrap();
    for key in ["device", "noise", "rb", "irb", "calibration", "classify", "output"] {
        assert!(props.contains_key(key), "missing {key}");
    }
}

#[test]
fn classify_bundled_and_csv_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = irb_lab(&["classify", "--bundled", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("classify.json"));
    let cases = report["results"]["cases"].as_array().unwrap();
    let verdicts: Vec<&str> = cases.iter().map(|c| c["report"]["verdict"].as_str().unwrap()).collect();
    assert_eq!(verdicts[0], "non_unitary");
    assert_ne!(verdicts[2], "non_unitary");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("linear") && stdout.contains("eps_pi_128"));

    let csv = dir.path().join("eps_0.csv");
    std::fs::write(&csv, include_str!("../data/eps_0.csv")).unwrap();
    let out = irb_lab(&[
        "classify",
        "--input",
        csv.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
}

#[test]
fn classify_needs_five_repeat_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(
        dir.path(),
        "short.csv",
        "x,y,y_err,series\n0,0.999,0.0001,alpha\n1,0.998,0.0001,alpha\n2,0.997,0.0001,alpha\n",
    );
    let out = irb_lab(&["classify", "--input", &csv, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn inconclusive_classification_exits_with_5() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", r#"{"classify": {"inconclusive_above": 0.01}}"#);
    let out = irb_lab(&[
        "classify",
        "--bundled",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(5), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("classify.json").exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("inconclusive"));
}
