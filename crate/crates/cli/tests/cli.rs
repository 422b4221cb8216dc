use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use efignn::verify::toy_dataset;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_efignn"))
}

fn toy() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/toy")
}

fn cora() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/cora")
}

fn run(args: &[&str]) -> Output {
    bin()
        .args(args)
        .env("EFIGNN_THREADS", "1")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json_line(o: &Output) -> serde_json::Value {
    let out = stdout(o);
    let line = out
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("JSON record");
    serde_json::from_str(line).unwrap()
}

fn train_toy(dir: &Path, extra: &[&str]) -> PathBuf {
    let model = dir.join("toy.efig");
    let data = toy();
    let mut args = vec![
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--epochs",
        "20",
        "--units",
        "4",
        "--out",
        model.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    model
}

#[test]
fn seeded_train_summary_is_reproducible() {
    let data = toy();
    let args = [
        "train",
        "--dataset",
        data.to_str().unwrap(),
        "--model",
        "joint",
        "--seeds",
        "1",
        "--epochs",
        "25",
        "--units",
        "4",
        "--no-timing",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    let v = json_line(&a);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seeds"], serde_json::json!([1]));
    assert!(v.get("wall_time_secs").is_none());
}

#[test]
fn cora_defaults_are_applied() {
    let o = run(&[
        "train",
        "--dataset",
        cora().to_str().unwrap(),
        "--model",
        "joint",
        "--epochs",
        "1",
        "--precision",
        "f32",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json_line(&o);
    let s = &v["settings"];
    assert_eq!(s["gnn_layers"], 3);
    assert_eq!(s["efi_layers"], 2);
    assert_eq!(s["units"], 128);
    assert_eq!(s["learning_rate"], 1e-3);
    assert_eq!(s["weight_decay"], 1e-2);
    assert_eq!(s["dropout"], 0.9);
    assert_eq!(s["skip"], "none");
    assert_eq!(s["batch_norm"], false);
    assert_eq!(v["config"]["gcn"]["units"], 128);
    assert!(v["wall_time_secs"].is_number());
}

#[test]
fn invalid_flags_are_usage_errors() {
    let t = toy();
    let t = t.to_str().unwrap();
    for args in [
        vec![
            "train",
            "--dataset",
            t,
            "--model",
            "gcn",
            "--efi-layers",
            "2",
        ],
        vec![
            "train",
            "--dataset",
            t,
            "--model",
            "efignn",
            "--skip",
            "dense",
        ],
        vec![
            "train",
            "--dataset",
            t,
            "--model",
            "gcn",
            "--include-block0",
            "off",
        ],
        vec!["train", "--dataset", t, "--epochs", "0"],
        vec!["train", "--dataset", t, "--seeds", "1,1"],
        vec!["train", "--dataset", t, "--precision", "f16"],
        vec!["train", "--dataset", "/nonexistent/bundle"],
        vec!["frobnicate"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn evaluate_reports_saved_model_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_toy(dir.path(), &["--model", "joint", "--seeds", "3"]);
    let o = run(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        toy().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json_line(&o);
    assert_eq!(v["command"], "evaluate");
    for k in ["train_acc", "val_acc", "test_acc"] {
        let a = v[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }

    let o = run(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        cora().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn explain_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_toy(dir.path(), &[]);
    let out = dir.path().join("fx");
    let o = run(&[
        "explain",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        toy().to_str().unwrap(),
        "--node",
        "0",
        "--class",
        "1",
        "--order",
        "2",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(out.join("effects_node0_class1_order2.csv")).unwrap();
    // Node 0 has two active features: four ordered pairs.
    assert_eq!(csv.lines().count(), 5);
    let svg = std::fs::read_to_string(out.join("effects_node0_class1_order2.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 4);

    let o = run(&[
        "explain",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        toy().to_str().unwrap(),
        "--node",
        "9",
        "--class",
        "0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn explain_order_beyond_depth_fails() {
    let dir = tempfile::tempdir().unwrap();
    let model = train_toy(dir.path(), &["--efi-layers", "0"]);
    let o = run(&[
        "explain",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        toy().to_str().unwrap(),
        "--node",
        "0",
        "--class",
        "0",
        "--order",
        "2",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("exceeds model depth"), "{}", stderr(&o));
}

#[test]
fn explain_node_without_features_warns() {
    let dir = tempfile::tempdir().unwrap();
    let mut ds = toy_dataset();
    ds.features.row_mut(1).iter_mut().for_each(|v| *v = 0.0);
    let bundle = dir.path().join("bundle");
    efignn::write_bundle(&bundle, &ds).unwrap();
    let model = dir.path().join("m.efig");
    let o = run(&[
        "train",
        "--dataset",
        bundle.to_str().unwrap(),
        "--epochs",
        "5",
        "--units",
        "3",
        "--out",
        model.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&[
        "explain",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        bundle.to_str().unwrap(),
        "--node",
        "1",
        "--class",
        "0",
        "--order",
        "1",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"));
    let csv = std::fs::read_to_string(dir.path().join("effects_node1_class0_order1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
}

#[test]
fn verify_passes_and_catches_injected_faults() {
    let o = run(&["verify"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count() > 20);

    let o = run(&["verify", "--inject-fault", "hadamard"]);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).lines().any(|l| l.starts_with("FAIL grad/")));

    let o = run(&["verify", "--inject-fault", "nonsense"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn divergent_training_is_a_numeric_abort() {
    let o = run(&[
        "train",
        "--dataset",
        toy().to_str().unwrap(),
        "--lr",
        "1e300",
        "--epochs",
        "50",
    ]);
    assert_eq!(code(&o), 3, "{}{}", stdout(&o), stderr(&o));
}
