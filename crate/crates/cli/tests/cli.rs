use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{
  "num_tasks": 3,
  "synth": {"tasks": 3, "relations_per_task": 2, "train_per_relation": 10, "test_per_relation": 4},
  "transe": {"dim": 16, "epochs": 3},
  "concept": {"d1": 8, "d2": 6, "concept_dim": 5, "epochs": 3},
  "train": {
    "epochs": 2, "memory_per_task": 6, "curriculum_k": 2, "curriculum_n": 5,
    "model": {"embedding_dim": 16, "hidden_dim": 16, "output_dim": 8}
  }
}"#;

fn cml_lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cml-lab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("CML_LAB_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cml_lab(&["synth", "--seed", "3", "--out", "a"], tmp.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("train.jsonl"));
    assert!(cml_lab(&["synth", "--seed", "3", "--out", "b"], tmp.path()).status.success());
    for f in ["train.jsonl", "test.jsonl", "tasks.json", "kg/triples.tsv", "kg/concepts.tsv", "similarity.csv"] {
        assert_eq!(fs::read(tmp.path().join("a").join(f)).unwrap(), fs::read(tmp.path().join("b").join(f)).unwrap(), "{f}");
    }
    let tasks: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("a/tasks.json")).unwrap()).unwrap();
    let tasks = tasks["tasks"].as_array().unwrap();
    assert_eq!(tasks.len(), 5);
    assert!(tasks.iter().all(|t| t["relations"].as_array().unwrap().len() == 4));
}

#[test]
fn infeasible_vocab_fails_with_config_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"synth": {"vocab_size": 10}}"#);
    let o = cml_lab(&["synth", "--config", &cfg, "--out", "x"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("vocab_size"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), r#"{"learning_rate": 0.1}"#);
    let o = cml_lab(&["study", "--config", &cfg, "--dry-run"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rate"));
}

#[test]
fn dry_run_prints_plan_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cml_lab(&["study", "--dry-run", "--strategy", "vanilla", "--seed", "4"], tmp.path());
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("cml-runs/vanilla-seed4"), "{text}");
    assert!(text.contains("pretrain-kg") && text.contains("skip (not needed by vanilla)"));
    assert!(text.contains("report"));
    assert!(fs::read_dir(tmp.path()).unwrap().next().is_none());
}

#[test]
fn output_root_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_cml-lab"))
        .args(["synth", "--seed", "2", "--dry-run"])
        .current_dir(tmp.path())
        .env("CML_LAB_OUT", "elsewhere")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("elsewhere/synth-seed2"));
}

#[test]
fn study_train_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = cml_lab(&["study", "--config", &cfg, "--out", "cml", "--seed", "5"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("acc_a"));
    let o = cml_lab(&["study", "--config", &cfg, "--out", "van", "--seed", "5", "--strategy", "vanilla", "--workers", "2"], tmp.path());
    assert!(o.status.success());

    let o = cml_lab(&["train", "--config", &cfg, "--out", "cml", "--seed", "5"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("cml/train/record.json").exists());

    let o = cml_lab(&["report", "cml", "van", "--out", "tables"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t1 = fs::read_to_string(tmp.path().join("tables/table1.csv")).unwrap();
    assert_eq!(t1.lines().count(), 3);
    assert!(tmp.path().join("tables/grid_vanilla.csv").exists());
    assert!(tmp.path().join("tables/table5.csv").exists());

    // Same directory, different seed.
    let o = cml_lab(&["study", "--config", &cfg, "--out", "cml", "--seed", "6"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn staged_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = cml_lab(&["pretrain-kg", "--config", &cfg, "--out", "r"], tmp.path());
    assert!(o.status.success());
    assert!(tmp.path().join("r/kg/transe/manifest.json").exists());
    assert!(!tmp.path().join("r/embeddings.tsv").exists());
    assert!(cml_lab(&["embed-relations", "--config", &cfg, "--out", "r"], tmp.path()).status.success());
    assert!(tmp.path().join("r/embeddings.tsv").exists());
    let o = cml_lab(&["partition", "--config", &cfg, "--out", "r"], tmp.path());
    assert!(o.status.success());
    assert!(stdout(&o).contains("reuse existing artifacts"));
    assert!(tmp.path().join("r/partition.json").exists());
    assert!(!tmp.path().join("r/study").exists());
}

#[test]
fn bad_arguments() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cml_lab(&["study", "--strategy", "ewc"], tmp.path()).status.code(), Some(2));
    assert_eq!(cml_lab(&["report"], tmp.path()).status.code(), Some(2));
    let o = cml_lab(&["report", "nowhere", "--out", "t"], tmp.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("nowhere"));
}
