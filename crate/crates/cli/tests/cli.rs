use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use kagnn::molgraph::molecule_to_json;
use kagnn::synthetic::{parity_molecules, ParityOptions};
use serde_json::Value;
use tempfile::TempDir;

fn kagnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kagnn"))
        .args(args)
        .env_remove("KAGNN_DATA_DIR")
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn parity_file(dir: &Path, count: usize, seed: u64) -> PathBuf {
    let path = dir.join(format!("parity_{count}_{seed}.jsonl"));
    let text: String = parity_molecules(count, seed, &ParityOptions::default())
        .unwrap()
        .iter()
        .map(|m| molecule_to_json(m) + "\n")
        .collect();
    std::fs::write(&path, text).unwrap();
    path
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SDF_RECORD: &str = "\
NAME
  handwritten

  3  2  0  0  0  0  0  0  0  0999 V2000
    0.0000    0.0000    0.1173 O   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000    0.7572   -0.4692 H   0  0  0  0  0  0  0  0  0  0  0  0
    0.0000   -0.7572   -0.4692 H   0  0  0  0  0  0  0  0  0  0  0  0
  1  2  1  0
  1  3  1  0
M  END
$$$$
";

#[test]
fn featurize_empty_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("empty.jsonl");
    std::fs::write(&input, "").unwrap();
    let output = dir.path().join("out.jsonl");
    let out = kagnn(&["featurize", "--input", s(&input), "--output", s(&output)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "");
}

#[test]
fn featurize_sdf_is_byte_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("three.sdf");
    let text: String = ["a", "b", "c"].iter().map(|n| SDF_RECORD.replace("NAME", n)).collect();
    std::fs::write(&input, text).unwrap();
    let (o1, o2) = (dir.path().join("1.jsonl"), dir.path().join("2.jsonl"));
    for o in [&o1, &o2] {
        let out = kagnn(&["featurize", "--input", s(&input), "--output", s(o), "--cutoff", "3"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let bytes = std::fs::read(&o1).unwrap();
    assert_eq!(bytes, std::fs::read(&o2).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 3);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["node_features"][0].as_array().unwrap().len(), 92);
    assert_eq!(first["edges"][0]["features"].as_array().unwrap().len(), 21);
}

#[test]
fn parse_errors_name_file_and_line() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.jsonl");
    let good = molecule_to_json(&parity_molecules(1, 0, &ParityOptions::default()).unwrap()[0]);
    std::fs::write(&input, format!("{good}\n{{\"id\": \"x\", \"atoms\": [\n")).unwrap();
    let out = kagnn(&["featurize", "--input", s(&input), "--output", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(&format!("{}:2:", input.display())), "{}", stderr(&out));

    let sdf = dir.path().join("bad.sdf");
    std::fs::write(&sdf, SDF_RECORD.replace("  3  2  0", "  x  y  0")).unwrap();
    let out = kagnn(&["featurize", "--input", s(&sdf), "--output", s(&dir.path().join("o.jsonl"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains(&format!("{}:", sdf.display())), "{}", stderr(&out));
}

#[test]
fn usage_and_data_exit_codes() {
    assert_eq!(code(&kagnn(&[])), 1);
    assert_eq!(code(&kagnn(&["frobnicate"])), 1);
    assert_eq!(code(&kagnn(&["train", "--out", "x"])), 1);
    assert_eq!(code(&kagnn(&["--help"])), 0);
    let dir = TempDir::new().unwrap();
    let out = kagnn(&["train", "--data", "/nonexistent/data.jsonl", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn config_errors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let data = parity_file(dir.path(), 20, 0);
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"batch_size": 0}"#).unwrap();
    let out = kagnn(&["train", "--data", s(&data), "--out", s(dir.path()), "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("batch_size"), "{}", stderr(&out));

    std::fs::write(&config, r#"{"learning_rat": 0.1}"#).unwrap();
    let out = kagnn(&["train", "--data", s(&data), "--out", s(dir.path()), "--config", s(&config)]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learning_rat"), "{}", stderr(&out));

    let out = kagnn(&["train", "--data", s(&data), "--out", s(dir.path()), "--lr=-1"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learning_rate"), "{}", stderr(&out));
}

#[test]
fn zero_epochs_reports_untrained_model() {
    let dir = TempDir::new().unwrap();
    let data = parity_file(dir.path(), 40, 1);
    let out_dir = dir.path().join("run");
    let out = kagnn(&["train", "--data", s(&data), "--out", s(&out_dir), "--epochs", "0", "--hidden", "8"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&out_dir.join("report.json"));
    let run = &report["runs"][0];
    assert_eq!(run["best_epoch"], 0);
    assert!(run["test_auc"].is_number());
    assert_eq!(std::fs::read_to_string(out_dir.join("epochs_0.csv")).unwrap().lines().count(), 1);
}

#[test]
fn repeats_report_mean_and_std_and_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = parity_file(dir.path(), 40, 2);
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = kagnn(&[
            "train", "--data", s(&data), "--out", s(&out_dir), "--repeats", "2", "--seed", "1", "--epochs", "3",
            "--hidden", "8", "--batch-size", "8", "--lr", "1e-3",
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(String::from_utf8_lossy(&out.stdout).contains("2 runs"));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    let report = read_json(&a.join("report.json"));
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert!(report["test_auc_mean"].is_number() && report["test_auc_std"].is_number());
    assert_eq!(report["runs"][1]["config"]["seed"], 2);
    for f in ["report.json", "config.json", "checkpoint_0.json", "checkpoint_1.json", "split_1.json", "epochs_1.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert!(a.join("metadata.json").exists());

    let eval = kagnn(&["eval", "--checkpoint", s(&a.join("checkpoint_0.json")), "--data", s(&data)]);
    assert_eq!(code(&eval), 0, "{}", stderr(&eval));
    assert!(String::from_utf8_lossy(&eval.stdout).contains("ROC-AUC"));
}

#[test]
fn parity_task_end_to_end() {
    let dir = TempDir::new().unwrap();
    let data = parity_file(dir.path(), 200, 0);
    let out_dir = dir.path().join("parity");
    let out = kagnn(&["train", "--data", s(&data), "--out", s(&out_dir), "--epochs", "200", "--threads", "0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&out_dir.join("report.json"));
    let auc = report["test_auc_mean"].as_f64().unwrap();
    assert!(auc >= 0.95, "test AUC {auc}");
    let config = &report["runs"][0]["config"];
    assert_eq!((config["batch_size"].as_u64(), config["K"].as_u64(), config["n_layers"].as_u64()), (Some(128), Some(2), Some(1)));
}

#[test]
fn gradcheck_small_passes_quickly_and_corruption_fails() {
    let t = Instant::now();
    let out = kagnn(&["gradcheck", "--k", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    assert!(t.elapsed() < Duration::from_secs(10), "{:?}", t.elapsed());
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS"));

    let out = kagnn(&["gradcheck", "--k", "1", "--graphs", "2", "--corrupt"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn fitfn_writes_predictions_and_summary() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str| {
        let out_dir = dir.path().join(name);
        let out = kagnn(&["fitfn", "--target", "sin", "--k", "3", "--steps", "300", "--out", s(&out_dir)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        out_dir
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["sin_kan_k3.csv", "sin_mlp.csv", "summary.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("sin_kan_k3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1001);
    let summary = read_json(&a.join("summary.json"));
    assert_eq!(summary["fits"].as_array().unwrap().len(), 2);

    let out = kagnn(&["fitfn", "--target", "polynomial", "--sweep-k", "1,4", "--steps", "50", "--out", s(&dir.path().join("sweep"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("sweep/polynomial_kan_k4.csv").exists());

    let out = kagnn(&["fitfn", "--target", "cosh", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn cutoff_sweep_changes_edge_count() {
    let dir = TempDir::new().unwrap();
    let data = parity_file(dir.path(), 60, 4);
    let manifest = dir.path().join("manifest.json");
    std::fs::write(
        &manifest,
        r#"{"base": {"epochs": 2, "hidden_dim": 8, "batch_size": 8}, "axes": {"cutoff": [0, 5], "K": [1]}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("sweep");
    let out = kagnn(&["sweep", "--manifest", s(&manifest), "--data", s(&data), "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let sweep = read_json(&out_dir.join("sweep.json"));
    let runs = sweep["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 3);
    let edges = |axis: &str, value: f64| {
        runs.iter()
            .find(|r| r["axis"] == axis && r["value"].as_f64() == Some(value))
            .map(|r| r["cutoff_edges"].as_u64().unwrap())
            .unwrap()
    };
    assert_eq!(edges("cutoff", 0.0), 0);
    assert!(edges("cutoff", 5.0) > 0);
    assert_eq!(std::fs::read_to_string(out_dir.join("sweep.csv")).unwrap().lines().count(), 4);
}
