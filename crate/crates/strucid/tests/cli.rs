use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use strucid::io;
use strucid_core::cases;

fn strucid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strucid")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Dir(tempfile::TempDir);

impl Dir {
    fn new() -> Self {
        Dir(tempfile::tempdir().unwrap())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.path().join(name)
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn generate(dir: &Dir, name: &str, case: &str, snr: &str, seed: &str) -> PathBuf {
    let out = dir.path(name);
    let o = strucid(&["generate", "--case", case, "--n", "1000", "--snr", snr, "--seed", seed, "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_shape_and_determinism() {
    let dir = Dir::new();
    let a = generate(&dir, "a.csv", "flow-mix", "10", "7");
    let b = generate(&dir, "b.csv", "flow-mix", "10", "7");
    let text = fs::read_to_string(&a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1001);
    assert_eq!(lines[0], "v1,v2,v3,v4,v5");
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 5));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(dir.path("a.provenance.json")).unwrap(), fs::read(dir.path("b.provenance.json")).unwrap());

    let prov = json(&dir.path("a.provenance.json"));
    assert_eq!(prov["seed"], 7);
    assert_eq!(prov["snr"], 10.0);
    assert_eq!(prov["model_source"], "flow-mix");
    assert!(prov["sigma"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn generate_from_model_file() {
    let dir = Dir::new();
    let model = dir.path("a.csv");
    io::write_matrix_csv(&model, cases::cs1().0.matrix()).unwrap();
    let out = dir.path("d.csv");
    let o = strucid(&["generate", "--model", s(&model), "--n", "50", "--snr", "inf", "--out", s(&out)]);
    assert_eq!(code(&o), 0);
    assert_eq!(io::read_data_csv(&out).unwrap().shape(), (6, 50));
    let prov = json(&dir.path("d.provenance.json"));
    assert_eq!(prov["snr"], "inf");
    assert_eq!(prov["sigma"][0], 0.0);
}

#[test]
fn round_trip_pca_noise_free() {
    let dir = Dir::new();
    let data = generate(&dir, "d.csv", "flow-mix", "inf", "2");
    let est = dir.path("est.csv");
    let o = strucid(&["identify", "--method", "pca", "--data", s(&data), "-m", "3", "--out", s(&est)]);
    assert_eq!(code(&o), 0);
    let o = strucid(&["evaluate", "--case", "flow-mix", "--est", s(&est)]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["theta"].as_f64().unwrap() < 1e-8);
    assert!(dir.path("est.diagnostics.json").exists());
}

#[test]
fn spca_output_respects_mask() {
    let dir = Dir::new();
    let (_, mask) = cases::flow_mix();
    let mask_path = dir.path("mask.txt");
    io::write_mask(&mask_path, &mask).unwrap();
    let data = generate(&dir, "d.csv", "flow-mix", "10", "3");
    let est = dir.path("est.csv");
    let o = strucid(&["identify", "--method", "spca", "--data", s(&data), "--mask", s(&mask_path), "--out", s(&est)]);
    assert_eq!(code(&o), 0);
    let a = io::read_matrix_csv(&est).unwrap();
    for i in 0..mask.rows() {
        for j in 0..mask.cols() {
            if !mask.get(i, j) {
                assert_eq!(a[(i, j)], 0.0);
            }
        }
    }
}

#[test]
fn cspca_reports_labels() {
    let dir = Dir::new();
    let data = generate(&dir, "d.csv", "cs3", "inf", "4");
    let est = dir.path("est.csv");
    let o = strucid(&["identify", "--method", "cspca", "--data", s(&data), "--case", "cs3", "--out", s(&est)]);
    assert_eq!(code(&o), 0);
    let diag = json(&dir.path("est.diagnostics.json"));
    assert_eq!(diag["label_string"], "SCCC");
    let labels: Vec<&str> = diag["labels"].as_array().unwrap().iter().map(|l| l["label"].as_str().unwrap()).collect();
    assert_eq!(labels, ["S", "C", "C", "C"]);
    let o = strucid(&["evaluate", "--case", "cs3", "--est", s(&est)]);
    assert!(stdout_json(&o)["theta"].as_f64().unwrap() < 1e-8);
}

#[test]
fn cpca_uses_known_rows() {
    let dir = Dir::new();
    let data = generate(&dir, "d.csv", "flow-mix", "inf", "5");
    let known = dir.path("known.csv");
    let a0 = cases::flow_mix().0.into_matrix();
    io::write_matrix_csv(&known, &a0.rows(0, 1).into_owned()).unwrap();
    let est = dir.path("est.csv");
    let o = strucid(&["identify", "--method", "cpca", "--data", s(&data), "--known", s(&known), "-m", "3", "--out", s(&est)]);
    assert_eq!(code(&o), 0);
    assert_eq!(io::read_matrix_csv(&est).unwrap().nrows(), 3);
    let o = strucid(&["identify", "--method", "cpca", "--data", s(&data), "--known", s(&known), "-m", "1", "--out", s(&est)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn identify_errors() {
    let dir = Dir::new();
    let data = generate(&dir, "d.csv", "flow-mix", "10", "1");
    let est = dir.path("est.csv");
    let o = strucid(&["identify", "--method", "pca", "--data", s(&data), "-m", "5", "--out", s(&est)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("InvalidRowCount"));
    let o = strucid(&["identify", "--method", "spca", "--data", s(&data), "--out", s(&est)]);
    assert_eq!(code(&o), 2);
    let o = strucid(&["identify", "--method", "ica", "--data", s(&data), "--out", s(&est)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn evaluate_examples() {
    let dir = Dir::new();
    let a0 = cases::flow_mix().0.into_matrix();
    let truth = dir.path("a0.csv");
    io::write_matrix_csv(&truth, &a0).unwrap();
    let o = strucid(&["evaluate", "--true", s(&truth), "--est", s(&truth)]);
    assert_eq!(code(&o), 0);
    assert!(stdout_json(&o)["theta"].as_f64().unwrap() < 1e-12);

    let permuted = dir.path("perm.csv");
    let p = strucid_core::RowPermutation::new(vec![2, 0, 1]).unwrap();
    io::write_matrix_csv(&permuted, &p.apply_rows(&a0)).unwrap();
    let o = strucid(&["evaluate", "--true", s(&truth), "--est", s(&permuted), "--normalize"]);
    let report = stdout_json(&o);
    assert!(report["theta"].as_f64().unwrap() < 1e-9);
    assert_eq!(report["normalized"], true);
    assert_eq!(report["per_row"].as_array().unwrap().len(), 3);

    let deficient = dir.path("def.csv");
    let mut d = a0.clone();
    let first = d.row(0).into_owned();
    d.set_row(1, &first);
    io::write_matrix_csv(&deficient, &d).unwrap();
    let o = strucid(&["evaluate", "--true", s(&truth), "--est", s(&deficient)]);
    assert_eq!(code(&o), 1);
}

fn write_config(dir: &Dir, name: &str, cfg: Value) -> PathBuf {
    let path = dir.path(name);
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn mc_sweep_outputs() {
    let dir = Dir::new();
    let cfg = write_config(
        &dir,
        "c.json",
        serde_json::json!({
            "case": "flow-mix",
            "methods": ["pca", "spca", "cpca"],
            "known_rows": [0],
            "snr_grid": [10, 100],
            "runs": 5,
            "n_samples": 200,
            "master_seed": 11
        }),
    );
    let out = dir.path("out");
    let o = strucid(&["mc-sweep", "--config", s(&cfg), "--out-dir", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,snr,mean_theta,std_theta,best_count");
    assert_eq!(lines.iter().filter(|l| l.contains(",10,")).count(), 3);
    assert_eq!(lines.iter().filter(|l| l.contains(",100,")).count(), 3);
    let long = fs::read_to_string(out.join("long.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 3 * 2 * 5);
    let env = json(&out.join("results.json"));
    assert_eq!(env["config"]["master_seed"], 11);
    assert!(env["version"].is_string());
    assert!(String::from_utf8_lossy(&o.stderr).contains("mc-sweep"));
}

#[test]
fn mc_sweep_single_run_is_reproducible() {
    let dir = Dir::new();
    let cfg = write_config(
        &dir,
        "c.json",
        serde_json::json!({"case": "cs3", "methods": ["pca", "spca"], "snr_grid": [50], "runs": 1, "master_seed": 3}),
    );
    for d in ["a", "b"] {
        assert_eq!(code(&strucid(&["mc-sweep", "--config", s(&cfg), "--out-dir", s(&dir.path(d))])), 0);
    }
    let read = |d: &str| fs::read(dir.path(d).join("long.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
}

#[test]
fn mc_sweep_bad_configs() {
    let dir = Dir::new();
    let bad = [
        serde_json::json!({"case": "flow-mix", "methods": ["cpca"], "snr_grid": [10], "runs": 2}),
        serde_json::json!({"case": "flow-mix", "methods": ["pca"], "snr_grid": [], "runs": 2}),
        serde_json::json!({"case": "nowhere", "methods": ["pca"], "snr_grid": [10], "runs": 2}),
        serde_json::json!({"case": "flow-mix", "methods": ["pca"], "snr_grid": [10], "runs": 2, "extra": 1}),
    ];
    for (k, cfg) in bad.into_iter().enumerate() {
        let path = write_config(&dir, &format!("c{k}.json"), cfg);
        let o = strucid(&["mc-sweep", "--config", s(&path), "--out-dir", s(&dir.path("out"))]);
        assert_eq!(code(&o), 2, "config {k}");
    }
    fs::write(dir.path("broken.json"), "{not json").unwrap();
    let o = strucid(&["mc-sweep", "--config", s(&dir.path("broken.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn mc_sweep_with_model_files() {
    let dir = Dir::new();
    let (model, mask) = cases::cs1();
    io::write_matrix_csv(&dir.path("a.csv"), model.matrix()).unwrap();
    io::write_mask(&dir.path("mask.txt"), &mask).unwrap();
    let cfg = write_config(
        &dir,
        "c.json",
        serde_json::json!({
            "case": {"model": "a.csv", "mask": "mask.txt"},
            "methods": ["spca"],
            "snr_grid": ["inf"],
            "runs": 2,
            "n_samples": 100
        }),
    );
    let out = dir.path("out");
    assert_eq!(code(&strucid(&["mc-sweep", "--config", s(&cfg), "--out-dir", s(&out)])), 0);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mean: f64 = summary.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(mean < 1e-8);
}

#[test]
fn fault_detect_examples() {
    let dir = Dir::new();
    io::write_matrix_csv(&dir.path("a0.csv"), cases::flow_mix().0.matrix()).unwrap();
    let quiet = write_config(
        &dir,
        "quiet.json",
        serde_json::json!({
            "case": "flow-mix", "methods": ["pca", "spca"], "snr": "inf",
            "n_samples": 300, "n_faulty": 20, "runs": 3, "magnitude": {"constant": 0.0}
        }),
    );
    let o = strucid(&["fault-detect", "--config", s(&quiet)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = stdout_json(&o);
    for m in summary["means"].as_array().unwrap() {
        assert_eq!(m["mean_detected"], 0.0);
    }

    let loud = write_config(
        &dir,
        "loud.json",
        serde_json::json!({
            "case": "flow-mix", "methods": [], "snr": "inf", "n_samples": 300, "n_faulty": 20,
            "runs": 1, "magnitude": {"constant": 1000.0}, "estimates": {"truth": "a0.csv"}
        }),
    );
    let out = dir.path("faults.json");
    assert_eq!(code(&strucid(&["fault-detect", "--config", s(&loud), "--out", s(&out)])), 0);
    let summary = json(&out);
    assert_eq!(summary["mean_oracle_detected"], 20.0);
    assert_eq!(summary["means"][0]["name"], "truth");
    assert_eq!(summary["means"][0]["mean_detected"], 20.0);

    let bad = write_config(
        &dir,
        "bad.json",
        serde_json::json!({"case": "flow-mix", "methods": ["pca"], "snr": 10, "n_samples": 10, "n_faulty": 20, "runs": 1}),
    );
    assert_eq!(code(&strucid(&["fault-detect", "--config", s(&bad)])), 2);
}

#[test]
fn help_and_listing() {
    for sub in ["generate", "identify", "evaluate", "mc-sweep", "fault-detect", "list-cases"] {
        let o = strucid(&[sub, "--help"]);
        assert_eq!(code(&o), 0, "{sub}");
        assert!(!o.stdout.is_empty());
    }
    assert_eq!(code(&strucid(&["generate", "--case", "cs1", "--out", "x.csv", "--bogus"])), 2);
    assert_eq!(code(&strucid(&["generate", "--case", "cs1", "--model", "a.csv", "--out", "x.csv"])), 2);
    assert_eq!(code(&strucid(&["generate", "--case", "nope", "--out", "x.csv"])), 2);
    let o = strucid(&["list-cases"]);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("flow-mix\t3 x 5"));
    assert!(text.contains("cs3\t4 x 6"));
}
