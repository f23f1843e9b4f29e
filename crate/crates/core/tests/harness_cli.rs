//! Drives the `nboruta` binary end to end.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nboruta::harness::{EvaluationDocument, SelectionDocument};
use serde_json::{json, Value};

fn nboruta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nboruta")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = nboruta(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn synth(dir: &Path, instances: usize, seed: u64) -> PathBuf {
    let path = dir.join("data.csv");
    let (i, s) = (instances.to_string(), seed.to_string());
    let p = path.to_str().unwrap();
    let stdout = ok(&["synth", "--instances", &i, "--informative", "3", "--noise", "7", "--seed", &s, "--out", p]);
    assert!(stdout.starts_with("informative: "));
    path
}

/// A config small enough to run in seconds.
fn small_config(dir: &Path, data: &Path, extra: Value) -> PathBuf {
    let mut cfg = json!({
        "data": data,
        "target": "target",
        "boruta": {"max_iter": 8, "n_estimators": 30, "max_depth": null, "alpha": 0.05},
        "noise_boruta": {
            "max_iter": 6,
            "mlp_spec": {"hidden_layers": [5], "epochs": 60, "learning_rate": 0.05, "batch_size": 32},
            "n_multiplier": 50.0,
            "perturb_mode": "gaussian",
            "min_hits": 2
        },
        "eval_mlp": {"hidden_layers": [8], "epochs": 40, "learning_rate": 0.05, "batch_size": 32},
        "eval_runs": 5,
        "master_seed": 3
    });
    if let (Value::Object(base), Value::Object(more)) = (&mut cfg, extra) {
        base.extend(more);
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn csv_header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn synth_writes_labelled_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = synth(dir.path(), 120, 1);
    let text = fs::read_to_string(path).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 11);
    assert_eq!(*header.last().unwrap(), "target");
    assert_eq!(text.lines().count(), 121);
}

#[test]
fn select_then_evaluate_saved_selection() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 200, 2);
    let cfg = small_config(dir.path(), &data, json!({}));
    let out = dir.path().join("run");
    let (c, o) = (cfg.to_str().unwrap(), out.to_str().unwrap());

    ok(&["select", "--config", c, "--method", "boruta", "--out", o]);
    let sel: SelectionDocument = serde_json::from_str(&fs::read_to_string(out.join("selection.json")).unwrap()).unwrap();
    assert_eq!(sel.selections.len(), 1);
    let art = &sel.selections[0];
    assert_eq!(art.train_rows + art.test_rows, 200);
    assert_eq!(art.selected.is_empty(), art.empty_selection);
    assert!(!art.selected.is_empty());

    let saved = out.join("selection.json");
    let out2 = dir.path().join("eval");
    ok(&["evaluate", "--config", c, "--selection", saved.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    let doc: EvaluationDocument = serde_json::from_str(&fs::read_to_string(out2.join("evaluation.json")).unwrap()).unwrap();
    assert_eq!(doc.reports.len(), 1);
    assert_eq!(doc.reports[0].selected_features, art.selected);
    assert_eq!(csv_header(&out2.join("f1_runs.csv")), "run,f1");
    assert_eq!(csv_header(&out2.join("entropy.csv")), "instance,entropy,correct");
    assert_eq!(fs::read_to_string(out2.join("f1_runs.csv")).unwrap().lines().count(), 6);
}

#[test]
fn evaluation_report_is_self_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 240, 4);
    let cfg = small_config(dir.path(), &data, json!({"method": "both"}));
    let c = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["evaluate", "--config", c, "--out", a.to_str().unwrap(), "--workers", "1"]);
    ok(&["evaluate", "--config", c, "--out", b.to_str().unwrap(), "--workers", "2"]);
    let text = fs::read(a.join("evaluation.json")).unwrap();
    assert_eq!(text, fs::read(b.join("evaluation.json")).unwrap());
    assert_eq!(fs::read(a.join("selection.json")).unwrap(), fs::read(b.join("selection.json")).unwrap());

    let doc: EvaluationDocument = serde_json::from_slice(&text).unwrap();
    assert_eq!(doc.reports.len(), 2);
    for r in &doc.reports {
        let n = r.f1_runs.len() as f64;
        assert_eq!(n, 5.0);
        let mean = r.f1_runs.iter().sum::<f64>() / n;
        let var = r.f1_runs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert_eq!(r.mean, mean);
        assert_eq!(r.std, var.sqrt());
        assert!(r.entropy.entropy.iter().all(|h| (0.0..=1.0).contains(h)));
        // Per-method CSVs land in their own directory.
        assert_eq!(csv_header(&a.join(&r.method).join("f1_runs.csv")), "run,f1");
    }
    let prov: Value = serde_json::from_slice(&text).unwrap();
    assert_eq!(prov["provenance"]["master_seed"], 3);
    assert!(prov["provenance"]["config"].get("workers").is_none());

    // Stored reports can be compared without rerunning anything.
    let evaluation = a.join("evaluation.json");
    let stdout = ok(&["compare", "--reports", evaluation.to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert!(stdout.contains("verdict: "));
    let cmp: Value = serde_json::from_str(&fs::read_to_string(a.join("comparison.json")).unwrap()).unwrap();
    let tests: Vec<&str> = cmp["tests"].as_array().unwrap().iter().map(|t| t["test_name"].as_str().unwrap()).collect();
    assert_eq!(tests.iter().filter(|t| t.contains("shapiro")).count(), 2);
    assert_eq!(tests.len(), 3);
}

#[test]
fn ablate_writes_one_row_per_n() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 200, 5);
    let cfg = small_config(dir.path(), &data, json!({}));
    let out = dir.path().join("abl");
    let stdout = ok(&["ablate", "--config", cfg.to_str().unwrap(), "--n", "5,20,50", "--out", out.to_str().unwrap()]);
    assert_eq!(stdout.lines().count(), 4);
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "n,selected,f1_mean,f1_std");
    assert_eq!(lines.len(), 4);
    let ns: Vec<f64> = lines[1..].iter().map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, [5.0, 20.0, 50.0]);
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("ablation.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().unwrap();
    assert!(rows.iter().all(|r| r["frozen"] == rows[0]["frozen"]));

    let one = dir.path().join("one");
    ok(&["ablate", "--config", cfg.to_str().unwrap(), "--n", "20", "--out", one.to_str().unwrap()]);
    assert_eq!(fs::read_to_string(one.join("ablation.csv")).unwrap().lines().count(), 2);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), 60, 6);
    let bad = small_config(dir.path(), &data, json!({"eval_rnus": 3}));
    let out = nboruta(&["select", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval_rnus"));

    let d = data.to_str().unwrap();
    assert_eq!(nboruta(&["select", "--data", d, "--target", "target", "--method", "lasso"]).status.code(), Some(2));
    assert_eq!(nboruta(&["select", "--data", d]).status.code(), Some(2));
    assert_eq!(nboruta(&["select", "--data", d, "--target", "target", "--eval-runs", "0"]).status.code(), Some(2));
    assert_eq!(nboruta(&["select", "--data", d, "--target", "target", "--n", "-1"]).status.code(), Some(2));
}

#[test]
fn data_errors_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("text.csv");
    fs::write(&text, "a,b,y\n1,oops,0\n2,3,1\n").unwrap();
    let single = dir.path().join("single.csv");
    fs::write(&single, "a,y\n1,0\n2,0\n3,0\n").unwrap();
    let missing = dir.path().join("absent.csv");
    for path in [&text, &single, &missing] {
        let out = nboruta(&["select", "--data", path.to_str().unwrap(), "--target", "y", "--max-iter", "2"]);
        assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let data = synth(dir.path(), 60, 7);
    let out = nboruta(&["select", "--data", data.to_str().unwrap(), "--target", "label"]);
    assert_eq!(out.status.code(), Some(3));
}
