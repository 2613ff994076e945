use std::path::Path;
use std::process::{Command, Output};

fn pnd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pnd"))
        .args(args)
        .output()
        .expect("run pnd")
}

fn simulate(dir: &Path) -> String {
    let out = dir.join("bench");
    let o = pnd(&[
        "simulate",
        "--out",
        out.to_str().unwrap(),
        "--streams",
        "2",
        "--days",
        "1",
        "--events-per-stream",
        "4",
        "--seed",
        "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out.join("manifest.json").to_str().unwrap().to_string()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = pnd(&[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(pnd(&["train", "--bogus"]).status.code(), Some(1));
}

#[test]
fn missing_input_is_a_data_error() {
    let o = pnd(&["experiment", "--features", "/nonexistent/features.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = simulate(dir.path());
    let mut models = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let o = pnd(&[
            "train",
            "--features",
            &manifest,
            "--model",
            "rf",
            "--n-trees",
            "10",
            "--seed",
            "9",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        models.push(std::fs::read(path).unwrap());
    }
    assert_eq!(models[0], models[1]);

    let o = pnd(&[
        "evaluate",
        "--model",
        dir.path().join("a.json").to_str().unwrap(),
        "--features",
        &manifest,
        "--test-split",
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_writes_ten_rows() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = simulate(dir.path());
    let report = dir.path().join("report.csv");
    let o = pnd(&[
        "experiment",
        "--features",
        &manifest,
        "--models",
        "all",
        "--n-trees",
        "10",
        "--seed",
        "1",
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&report).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model,variant,accuracy,precision,recall,f1,train_seconds,seed"
    );
    assert_eq!(lines.len(), 11);
    for variant in ["original", "smote"] {
        assert_eq!(lines.iter().filter(|l| l.contains(variant)).count(), 5);
    }
}
