use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lcvar::io::read_matrix_file;
use serde_json::Value;

fn lcvar(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lcvar")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path.to_string_lossy().into_owned()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

const SMALL_FIT: &str = r#"{
  "seed": 3,
  "model": {"kind": "sparse", "p": 6, "nnz": 9},
  "data": {"n": 30, "m": 40, "steady": 200},
  "fit": {"constraint": {"kind": "cardinality", "bound": 9}, "rho1": 0.5}
}"#;

#[test]
fn generate_writes_consistent_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_FIT);
    let out = dir.path().join("gen");
    let o = lcvar(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read_matrix_file(&out.join("A.csv")).unwrap().shape(), (6, 6));
    assert_eq!(read_matrix_file(&out.join("train.csv")).unwrap().shape(), (6, 30));
    assert_eq!(read_matrix_file(&out.join("test.csv")).unwrap().shape(), (6, 40));
    assert_eq!(read_matrix_file(&out.join("steady.csv")).unwrap().shape(), (6, 200));
    let meta: Value = serde_json::from_str(&fs::read_to_string(out.join("meta.json")).unwrap()).unwrap();
    assert_eq!(meta["nnz"], 9);
    assert!(meta["spectral_radius"].as_f64().unwrap() < 1.0);
}

#[test]
fn fit_is_deterministic_and_feasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_FIT);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = lcvar(&["fit", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(a.join("estimate.csv")).unwrap(), fs::read(b.join("estimate.csv")).unwrap());
    assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap());
    let est = read_matrix_file(&a.join("estimate.csv")).unwrap();
    assert!(est.iter().filter(|v| **v != 0.0).count() <= 9);
    let r = report(&a);
    assert_eq!(r["status"], "converged");
    assert!(r["evaluation"]["normalized_error"].as_f64().unwrap().is_finite());

    let c = dir.path().join("c");
    let o = lcvar(&["fit", "--config", &cfg, "--seed", "4", "--out", c.to_str().unwrap()]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("estimate.csv")).unwrap(), fs::read(c.join("estimate.csv")).unwrap());
}

#[test]
fn fit_from_files_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_FIT);
    let gen = dir.path().join("gen");
    assert!(lcvar(&["generate", "--config", &cfg, "--out", gen.to_str().unwrap()]).status.success());

    let from_files = r#"{
      "inputs": {"train": "gen/train.csv", "steady": "gen/steady.csv", "test": "gen/test.csv"},
      "fit": {"constraint": {"kind": "l1_ball", "bound": 3.0}, "solver": {"kind": "gp", "max_iters": 2000}}
    }"#;
    let cfg2 = write_config(dir.path(), "files.json", from_files);
    let fit = dir.path().join("fit");
    let o = lcvar(&["fit", "--config", &cfg2, "--out", fit.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&fit)["solver"], "gp");

    let ev = dir.path().join("ev");
    let o = lcvar(&[
        "eval",
        "--estimate",
        fit.join("estimate.csv").to_str().unwrap(),
        "--test",
        gen.join("test.csv").to_str().unwrap(),
        "--out",
        ev.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let printed: Value = serde_json::from_slice(&o.stdout).unwrap();
    let stored: Value = serde_json::from_str(&fs::read_to_string(ev.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(printed, stored);
    assert_eq!(
        printed["normalized_error"].as_f64().unwrap(),
        report(&fit)["evaluation"]["normalized_error"].as_f64().unwrap()
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"seed": 1, "sede": 2}"#);
    assert_eq!(lcvar(&["fit", "--config", &bad]).status.code(), Some(2));
    let missing = write_config(dir.path(), "missing.json", r#"{"inputs": {"train": "nope.csv"}}"#);
    assert_eq!(lcvar(&["fit", "--config", &missing]).status.code(), Some(2));
    assert_eq!(lcvar(&["eval", "--test", "x.csv"]).status.code(), Some(2));

    let short = SMALL_FIT.replace(r#""rho1": 0.5}"#, r#""rho1": 0.5, "solver": {"kind": "palm", "max_iters": 2}}"#);
    let cfg = write_config(dir.path(), "short.json", &short);
    let out = dir.path().join("short");
    let o = lcvar(&["fit", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&out)["status"], "max_iters");
    assert!(out.join("estimate.csv").exists());
}

#[test]
fn sweep_writes_full_score_table() {
    let dir = tempfile::tempdir().unwrap();
    let json = SMALL_FIT.replace(
        r#""fit":"#,
        r#""sweep": {"rho1": [0.1, 1.0], "sigma": [0.5, 1.0, 2.0], "scheme": {"kind": "blocked_k_fold", "folds": 3}}, "fit":"#,
    );
    let cfg = write_config(dir.path(), "s.json", &json);
    let out = dir.path().join("sweep");
    let o = lcvar(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.code().unwrap() <= 1, "{}", String::from_utf8_lossy(&o.stderr));
    let mut rdr = csv::Reader::from_path(out.join("cv_scores.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let values: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    let best = report(&out)["best"]["value"].as_f64().unwrap();
    assert_eq!(best, values.iter().cloned().fold(f64::INFINITY, f64::min));
}

#[test]
fn compare_writes_tallies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "cmp.json",
        r#"{"seed": 2, "compare": {"systems": 2, "p_min": 3, "p_max": 5, "alphas": [0.5]}}"#,
    );
    let out = dir.path().join("cmp");
    let o = lcvar(&["compare", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = csv::Reader::from_path(out.join("compare_results.csv")).unwrap().records().count();
    assert_eq!(results, 6);
    let mut rdr = csv::Reader::from_path(out.join("compare_summary.csv")).unwrap();
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let wins: usize = (2..5).map(|i| rec[i].parse::<usize>().unwrap()).sum();
        assert_eq!(wins, rec[5].parse::<usize>().unwrap());
    }
}
