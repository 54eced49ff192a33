use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use wkm::cli::{exit_code_for, EXIT_NUMERICAL, EXIT_OK, EXIT_REJECT, EXIT_USAGE};

fn wkm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wkm")).args(args).current_dir(dir).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.json"), r#"{"family":"student_t","nu":2.5}"#).unwrap();
    std::fs::write(d.join("g.json"), r#"{"family":"gaussian","mu":0.0,"sigma":1.0}"#).unwrap();
    std::fs::write(d.join("w.toml"), "kind = \"absolute\"\nq = 1.0\n").unwrap();
    std::fs::write(
        d.join("policy.json"),
        r#"{"core":{"kind":"bootstrap","alpha":0.05},"tail":{"var_level":0.01,"test_level":0.05},"q_grid":[0.5,1,1.5,2,2.5],"bootstrap":200}"#,
    )
    .unwrap();
    let out = wkm(d, &["sample", "--model", "t.json", "--n", "1500", "--seed", "3", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    dir
}

#[test]
fn sample_writes_a_headed_column() {
    let dir = setup();
    let text = std::fs::read_to_string(dir.path().join("x.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("value"));
    assert_eq!(lines.filter(|l| l.parse::<f64>().is_ok()).count(), 1500);
}

#[test]
fn metric_reports_value_and_bound() {
    let dir = setup();
    let out = wkm(dir.path(), &["metric", "--data", "x.csv", "--model", "t.json", "--weight", "w.toml"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v = json(&out);
    let value = v["value"].as_f64().unwrap();
    assert!(value > 0.0 && value < 0.1, "{v}");
    assert!(v["error_bound"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["n"], 1500);
    assert_eq!(v["q"], 1.0);
}

#[test]
fn two_sample_of_identical_files_is_zero() {
    let dir = setup();
    let out = wkm(dir.path(), &["two-sample", "--a", "x.csv", "--b", "x.csv", "--weight", "w.toml"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(json(&out)["value"], 0.0);
}

#[test]
fn validate_accepts_the_true_model_and_rejects_a_gaussian() {
    let dir = setup();
    let d = dir.path();
    let base = ["validate", "--data", "x.csv", "--policy", "policy.json", "--seed", "11"];
    let ok = wkm(d, &[&base[..], &["--model", "t.json"]].concat());
    assert_eq!(ok.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&ok.stdout));
    assert_eq!(json(&ok)["accept"], true);
    let bad = wkm(d, &[&base[..], &["--model", "g.json"]].concat());
    assert_eq!(bad.status.code(), Some(EXIT_REJECT));
    assert_eq!(json(&bad)["accept"], false);
}

#[test]
fn usage_errors_exit_two() {
    let dir = setup();
    let d = dir.path();
    assert_eq!(wkm(d, &["metric", "--data", "x.csv"]).status.code(), Some(EXIT_USAGE));
    assert_eq!(wkm(d, &["frobnicate"]).status.code(), Some(EXIT_USAGE));
    std::fs::write(d.join("bad.json"), r#"{"family":"gaussian","mu":0.0,"sigma":-1.0}"#).unwrap();
    let out = wkm(d, &["sample", "--model", "bad.json", "--n", "5", "--seed", "1", "--out", "y.csv"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
    assert!(!out.stderr.is_empty());
    let out = wkm(d, &["metric", "--data", "missing.csv", "--model", "t.json", "--weight", "w.toml"]);
    assert_eq!(out.status.code(), Some(EXIT_USAGE));
}

#[test]
fn numerical_failures_map_to_exit_three() {
    let e = anyhow::Error::new(wkm_core::Error::DegenerateTruncation).context("evaluating bound");
    assert_eq!(exit_code_for(&e), EXIT_NUMERICAL);
    let e = anyhow::Error::new(wkm_core::Error::QuadratureFailed { estimate: 1.0, error: 1.0 });
    assert_eq!(exit_code_for(&e), EXIT_NUMERICAL);
    assert_eq!(exit_code_for(&anyhow::anyhow!("other")), EXIT_USAGE);
}

#[test]
fn bootstrap_cache_is_reused() {
    let dir = setup();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["bootstrap", "--model", "g.json", "--n", "100", "--weight", "w.toml", "-B", "120", "--seed", "4", "--cache-dir", "cache", "--out", out]
    };
    assert_eq!(wkm(d, &args("a.csv")).status.code(), Some(EXIT_OK));
    let entries: Vec<_> = std::fs::read_dir(d.join("cache")).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1);
    // a rewritten cache entry is served back, proving the second run read it
    let table: String = (0..120).map(|b| format!("{b},{}\n", 0.5 + b as f64 * 1e-3)).collect();
    std::fs::write(&entries[0], format!("b,value\n{table}")).unwrap();
    let out = wkm(d, &args("b.csv"));
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let b = std::fs::read_to_string(d.join("b.csv")).unwrap();
    assert_eq!(b.lines().nth(1), Some("0,0.5"));
    assert_eq!(json(&out)["b"], 120);
}

#[test]
fn grid_writes_per_q_rows() {
    let dir = setup();
    let out = wkm(dir.path(), &["grid", "--data", "x.csv", "--model", "t.json", "--model", "g.json", "--eps", "0.04", "--out", "grid.csv"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v = json(&out);
    assert_eq!(v["models"][0]["pass"], true);
    assert_eq!(v["models"][1]["pass"], false);
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("model,family,q,value,d_rob,argmax_q"));
    assert_eq!(csv.lines().count(), 11);
}

#[test]
fn params_json_reports_a_plan_for_student_t() {
    let dir = setup();
    let out = wkm(dir.path(), &["params", "--model", "t.json", "--json"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let v = json(&out);
    assert!(v["plan"]["beta"].as_f64().unwrap() > 0.0, "{v}");
}

#[test]
fn tailscan_writes_rows_and_fit() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(
        d.join("scan.toml"),
        "delta = 0.5\n[model]\nfamily = \"pareto\"\nalpha = 2.8\n[exhaustion]\nkind = \"absolute\"\n[r_grid]\nmin = 10.0\nmax = 1e6\npoints = 12\n",
    )
    .unwrap();
    let out = wkm(d, &["tailscan", "--config", "scan.toml", "--out", "scan.csv"]);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&out.stderr));
    let slope = json(&out)["remainder_fit"]["slope"].as_f64().unwrap();
    assert!((slope + 0.3).abs() < 0.05, "{slope}");
    assert_eq!(std::fs::read_to_string(d.join("scan.csv")).unwrap().lines().count(), 13);
}
