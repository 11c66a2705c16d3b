use std::path::Path;
use std::process::{Command, Output};

use stylodrift_cli::run::read_manifest;
use stylodrift_cli::stages::STAGES;

fn stylodrift(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stylodrift"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

/// Full-size synth corpus with a short bootstrap to keep the suite quick.
fn quick_config(dir: &Path) -> std::path::PathBuf {
    let p = dir.join("quick.json");
    std::fs::write(&p, r#"{"bootstrap": {"iterations": 20}}"#).unwrap();
    p
}

#[test]
fn all_writes_every_stage_and_reruns_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path());
    let cfg = cfg.to_str().unwrap();
    for run_id in ["a", "b"] {
        let out = stylodrift(tmp.path(), &["--config", cfg, "--run-id", run_id, "all"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = read_manifest(&tmp.path().join("a")).unwrap();
    let b = read_manifest(&tmp.path().join("b")).unwrap();
    let commands: Vec<&str> = a.iter().map(|e| e.command.as_str()).collect();
    assert_eq!(commands, STAGES);
    for entry in &a {
        assert!(!entry.outputs.is_empty(), "{} wrote nothing", entry.command);
        for f in &entry.outputs {
            assert!(tmp.path().join("a").join(&f.path).is_file(), "{} missing", f.path);
        }
    }
    assert!(tmp.path().join("a/config.json").is_file());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.config_sha256, y.config_sha256);
        assert_eq!(x.outputs, y.outputs, "{} outputs differ between runs", x.command);
    }
}

#[test]
fn cluster_without_deltas_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = stylodrift(tmp.path(), &["--run-id", "r", "cluster"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("deltas.csv") && err.contains("`deltas`"), "{err}");
    assert!(!tmp.path().join("r/cluster").exists());
}

#[test]
fn invalid_config_exits_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    std::fs::write(&cfg, r#"{"holm_alpha": 1.5}"#).unwrap();
    let out = stylodrift(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--run-id", "r", "synth"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("r").exists());

    std::fs::write(&cfg, "{not json").unwrap();
    let out = stylodrift(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--run-id", "r", "synth"],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stage_outputs_are_write_once() {
    let tmp = tempfile::tempdir().unwrap();
    let small = tmp.path().join("small.json");
    std::fs::write(
        &small,
        r#"{"synth": {"noise_authors": 3, "groups": [], "docs_per_author_per_period": 12}}"#,
    )
    .unwrap();
    let args = ["--config", small.to_str().unwrap(), "--run-id", "r", "synth"];
    assert!(stylodrift(tmp.path(), &args).status.success());
    let before = std::fs::read(tmp.path().join("r/synth/corpus.jsonl")).unwrap();
    let again = stylodrift(tmp.path(), &args);
    assert_eq!(again.status.code(), Some(2));
    assert_eq!(std::fs::read(tmp.path().join("r/synth/corpus.jsonl")).unwrap(), before);
    assert_eq!(read_manifest(&tmp.path().join("r")).unwrap().len(), 1);
}

#[test]
fn reopening_a_run_with_another_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let small = tmp.path().join("small.json");
    std::fs::write(
        &small,
        r#"{"synth": {"noise_authors": 3, "groups": [], "docs_per_author_per_period": 12}}"#,
    )
    .unwrap();
    let ok = stylodrift(
        tmp.path(),
        &["--config", small.to_str().unwrap(), "--run-id", "r", "synth"],
    );
    assert!(ok.status.success());
    let other = stylodrift(
        tmp.path(),
        &[
            "--config",
            small.to_str().unwrap(),
            "--seed",
            "7",
            "--run-id",
            "r",
            "ingest",
        ],
    );
    assert_eq!(other.status.code(), Some(2));
    assert!(!tmp.path().join("r/ingest").exists());
}

#[test]
fn empty_corpus_after_filtering_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus.jsonl");
    std::fs::write(
        &corpus,
        r#"{"doc_id":"d1","author_id":"a","timestamp":0,"genre":"social","category":"Tech","text":"too short"}"#,
    )
    .unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg,
        serde_json::json!({"corpus": corpus, "logprobs": corpus}).to_string(),
    )
    .unwrap();
    let out = stylodrift(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--run-id", "r", "ingest"],
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!tmp.path().join("r/ingest").exists());
}

#[test]
fn missing_configured_input_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"corpus": "/nonexistent/corpus.jsonl"}"#).unwrap();
    let out = stylodrift(
        tmp.path(),
        &["--config", cfg.to_str().unwrap(), "--run-id", "r", "ingest"],
    );
    assert_eq!(out.status.code(), Some(2));
}
