use std::path::Path;
use std::process::{Command, Output};

fn fpm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("fpm runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CONFIG: &str = r#"{
  "seed": 11,
  "synth": {"n_patients": 400, "n_numeric": 10, "n_categorical": 1},
  "synth_notes": {},
  "architecture": {"hidden": [8], "rep_dim": 4},
  "lda": {"k": 3, "sweeps": 10, "infer_sweeps": 5},
  "training": {"epochs": 2},
  "classifier_params": {"n_trees": 4, "n_rounds": 4},
  "experiment": {"tasks": ["30d"], "accuracy_classifiers": ["tree"]}
}"#;

#[test]
fn help_lists_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = stdout(&fpm(dir.path(), &["--help"]));
    for sub in [
        "synth",
        "preprocess",
        "topics",
        "train",
        "encode",
        "classify",
        "fairness",
        "feature-report",
        "experiment",
    ] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn step_by_step_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    let base = ["--config", "cfg.json", "--out", "o"];
    let run = |extra: &[&str]| stdout(&fpm(d, &[&base[..], extra].concat()));

    let synth = run(&["synth"]);
    assert!(synth.contains("400 patients"), "{synth}");
    assert!(d.join("o/notes.jsonl").exists());

    let topics = run(&["topics", "fit", "--notes", "o/notes.jsonl"]);
    assert!(topics.contains("perplexity:"));
    run(&["topics", "vectorize", "--model", "o/topics.json", "--notes", "o/notes.jsonl", "--matrix", "o/matrix.csv"]);
    assert!(d.join("o/matrix_topics.csv").exists());

    let train = run(&["train", "--matrix", "o/matrix_topics.csv", "--preset", "rw-sdae"]);
    assert!(train.contains("| Reweighting + SDAE |"), "{train}");
    run(&["encode", "--checkpoint", "o/rw-sdae.checkpoint.json", "--matrix", "o/matrix_topics.csv"]);
    let classify = run(&[
        "classify",
        "--reps",
        "o/rw-sdae.reps.csv",
        "--matrix",
        "o/matrix_topics.csv",
        "--task",
        "60d",
        "--classifier",
        "logistic",
    ]);
    assert!(classify.contains("accuracy: "));
    let fairness = run(&["fairness", "--predictions", "o/rw-sdae_60d_logistic.predictions.csv"]);
    assert!(fairness.contains("| Demographic Parity Ratio |"));
    let features = run(&[
        "feature-report",
        "--checkpoint",
        "o/rw-sdae.checkpoint.json",
        "--matrix",
        "o/matrix_topics.csv",
        "--top-n",
        "2",
    ]);
    assert_eq!(features.lines().filter(|l| l.starts_with("best ")).count(), 2);
}

#[test]
fn experiment_seed_flag_changes_results_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("cfg.json"), CONFIG).unwrap();
    let a = stdout(&fpm(d, &["--config", "cfg.json", "--out", "x", "experiment"]));
    let b = stdout(&fpm(d, &["--config", "cfg.json", "--out", "x", "experiment"]));
    let c = stdout(&fpm(d, &["--config", "cfg.json", "--out", "x", "--seed", "12", "experiment"]));
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.contains("| 30-day mortality | SDAE |"));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("x/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 12);
}

#[test]
fn bad_inputs_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), r#"{"seeed": 3}"#).unwrap();
    let o = fpm(d, &["--config", "bad.json", "synth"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seeed"));

    let o = fpm(d, &["train", "--matrix", "missing.csv"]);
    assert!(!o.status.success());

    let o = fpm(d, &["train", "--matrix", "m.csv", "--preset", "vae"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("vae"));
}
