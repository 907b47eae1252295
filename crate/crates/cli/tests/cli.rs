use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn knet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knet"))
        .args(args)
        .arg("--quiet")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = knet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Writes `body` merged over a small, quick training setup.
fn write_config(dir: &Path, name: &str, body: Value) -> PathBuf {
    let mut cfg = json!({ "max_outer_iters": 3, "kmeans_restarts": 3 });
    for (k, v) in body.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join(name);
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn metrics(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("metrics.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    ok(&["gen", "moons", "--n", "1000", "--seed", "7", "--out", s(&a)]);
    ok(&["gen", "moons", "--n", "1000", "--seed", "7", "--out", s(&b)]);
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 1001);
    assert_eq!(text.lines().next().unwrap(), "x,y,label");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn unwritable_output_is_reported() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("missing/dir/out.csv");
    let out = knet(&["gen", "spirals", "--n", "30", "--out", s(&target)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(s(&target)), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn fit_without_labels_writes_outputs_but_no_score() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("moons.csv");
    ok(&["gen", "moons", "--n", "60", "--seed", "1", "--out", s(&data)]);
    let unlabeled: String = fs::read_to_string(&data)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(&data, unlabeled).unwrap();
    let cfg = write_config(dir.path(), "fit.json", json!({ "dataset": { "kind": "csv", "path": "moons.csv" }, "c": 2 }));
    let out = dir.path().join("run");
    ok(&["fit", "--config", s(&cfg), "--out", s(&out)]);

    let m = metrics(&out);
    assert!(m.get("nmi").is_none());
    assert_eq!(m["n"], 60);
    for file in ["model.json", "history.csv", "embedding.csv", "kernel.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }
    let embedding = fs::read_to_string(out.join("embedding.csv")).unwrap();
    assert_eq!(embedding.lines().next().unwrap(), "z0,z1,cluster");
    assert_eq!(embedding.lines().count(), 61);
    assert_eq!(fs::read_to_string(out.join("kernel.csv")).unwrap().lines().count(), 60);
}

#[test]
fn fit_requires_c_for_unlabeled_data() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("moons.csv");
    ok(&["gen", "moons", "--n", "20", "--out", s(&data)]);
    let cfg = write_config(dir.path(), "fit.json", json!({ "dataset": { "kind": "csv", "path": "moons.csv" } }));
    let out = knet(&["fit", "--config", s(&cfg), "--out", s(&dir.path().join("run"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("must set c"));
}

#[test]
fn sweep_writes_one_row_per_lambda() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "sweep.json",
        json!({ "dataset": { "kind": "moons", "n": 40 }, "max_outer_iters": 2 }),
    );
    let out = dir.path().join("sweep");
    ok(&["sweep-lambda", "--config", s(&cfg), "--out", s(&out), "--lambdas", "1,0"]);
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "hsic,recon_error,nmi_eig,nmi_sma,lambda");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with(",1.0"), "{}", lines[1]);
    assert!(lines[2].ends_with(",0.0"), "{}", lines[2]);
}

#[test]
fn full_fraction_oos_matches_fit() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", json!({ "dataset": { "kind": "moons", "n": 80 }, "seed": 4 }));
    let fit_dir = dir.path().join("fit");
    let oos_dir = dir.path().join("oos");
    ok(&["fit", "--config", s(&cfg), "--out", s(&fit_dir)]);
    ok(&["oos", "--config", s(&cfg), "--out", s(&oos_dir), "--fraction", "1.0"]);
    let fit = metrics(&fit_dir);
    let oos = metrics(&oos_dir);
    assert_eq!(oos["n_train"], 80);
    assert_eq!(oos["nmi"], fit["nmi"]);
    assert_eq!(oos["nmi_train"], fit["nmi"]);
    assert!(oos.get("nmi_holdout").is_none());
}

#[test]
fn oos_rejects_a_tiny_subsample() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "run.json", json!({ "dataset": { "kind": "moons", "n": 20 } }));
    let out = knet(&["oos", "--config", s(&cfg), "--out", s(&dir.path().join("o")), "--fraction", "0.1"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("smaller than 2c"));
}

#[test]
fn spectral_baseline_separates_blobs() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("a,b,label\n");
    for i in 0..30 {
        let (cx, name) = if i % 2 == 0 { (-10.0, "left") } else { (10.0, "right") };
        let jitter = (i as f64 * 0.37).sin() * 0.3;
        csv += &format!("{},{},{name}\n", cx + jitter, jitter * 2.0);
    }
    fs::write(dir.path().join("blobs.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "sc.json",
        json!({ "dataset": { "kind": "csv", "path": "blobs.csv", "label_column": "label" } }),
    );
    let out = dir.path().join("sc");
    ok(&["baseline-sc", "--config", s(&cfg), "--out", s(&out)]);
    let m = metrics(&out);
    assert_eq!(m["nmi"], 1.0);
    assert_eq!(m["c"], 2);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", json!({ "dataset": { "kind": "moons", "n": 20 }, "learning_rat": 0.1 }));
    let out = knet(&["fit", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("learning_rat"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
}

#[test]
fn invalid_training_parameters_fail_cleanly() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "bad.json", json!({ "dataset": { "kind": "moons", "n": 20 }, "batch_size": 0 }));
    let out = knet(&["fit", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: ") && err.contains("batch_size"), "{err}");
}
