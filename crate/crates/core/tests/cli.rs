use std::path::Path;
use std::process::{Command, Output};

fn photoqubo(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_photoqubo"));
    cmd.args(args);
    if let Some(dir) = out {
        cmd.env("PHOTOQUBO_OUT", dir);
    }
    let output = cmd.output().expect("binary runs");
    assert!(
        output.status.success(),
        "photoqubo {args:?} failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

#[test]
fn timing_json_has_reported_values() {
    let out = photoqubo(&["timing"], None);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let ovmm = v["tau_ovmm_s"].as_f64().unwrap();
    assert!((ovmm - 128.9e-12).abs() < 1.3e-12);
    let out = photoqubo(&["timing", "--format", "csv", "--dac-ns", "3.5", "--adc-ns", "3.4"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("quantity,value\n"));
    assert!(text.contains("tau_dacadc_s,6.9e-9"));
}

#[test]
fn gen_solve_and_rederive() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("p.json");
    let mesh = dir.path().join("mesh.json");
    photoqubo(
        &["gen", "--n", "8", "--seed", "3", "--out", problem.to_str().unwrap(), "--mesh-out", mesh.to_str().unwrap()],
        None,
    );
    assert!(mesh.exists());

    let out = dir.path().join("campaign");
    photoqubo(
        &["solve", "--problem-file", problem.to_str().unwrap(), "--runs", "5", "--iterations", "120", "--snr-db", "26.6"],
        Some(&out),
    );
    for f in ["campaign.json", "problem.json", "runs.jsonl", "summary.csv", "curves.csv", "evolution.csv", "stability.json"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    let stability = std::fs::read_to_string(out.join("stability.json")).unwrap();

    photoqubo(&["curves"], Some(&out));
    assert_eq!(std::fs::read_to_string(out.join("curves.csv")).unwrap(), curves);
    photoqubo(&["stability"], Some(&out));
    assert_eq!(std::fs::read_to_string(out.join("stability.json")).unwrap(), stability);

    photoqubo(&["curves", "--eta", "0.5"], Some(&out));
    let rewritten = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert!(rewritten.lines().skip(1).all(|l| l.starts_with("0.5,")));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"problem": {"mode": "random-psd", "n": 6}, "runs": 50, "iterations": 80, "evaluator": "exact"}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    photoqubo(&["solve", "--config", cfg.to_str().unwrap(), "--runs", "3"], Some(&out));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
}

#[test]
fn malformed_problem_file_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{not json").unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_photoqubo"))
        .args(["solve", "--problem-file", bad.to_str().unwrap()])
        .env("PHOTOQUBO_OUT", dir.path().join("o"))
        .output()
        .unwrap();
    assert!(!output.status.success());
    assert!(String::from_utf8_lossy(&output.stderr).contains("bad.json"));
}
