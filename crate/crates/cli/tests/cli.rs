use std::process::{Command, Output};

fn alreview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_alreview")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn gradcheck_reports_ok() {
    let o = alreview(&["gradcheck", "--models", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains(": ok"));
}

#[test]
fn malformed_corpus_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("bad.jsonl");
    std::fs::write(&corpus, "{\"id\":\"a\",\"text\":\"fine\"}\n{oops\n").unwrap();
    let store = dir.path().join("store");
    let o = alreview(&["ingest", corpus.to_str().unwrap(), "--store", store.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.json");
    std::fs::write(&cfg, r#"{"corpus": "c.jsonl", "experiment": {"round": 3}}"#).unwrap();
    let o = alreview(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("round"), "{}", stderr(&o));
}

#[test]
fn store_round_trip_through_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let d = |p: &str| dir.path().join(p).to_str().unwrap().to_string();
    std::fs::write(d("spec.json"), r#"{"n_samples": 120, "validation_size": 30, "seed": 2}"#).unwrap();
    assert!(alreview(&["synth", "--spec", &d("spec.json"), "--out", &d("data")]).status.success());
    std::fs::write(d("svc.json"), r#"{"hyper": {"hidden": 4, "epochs": 2, "batch_size": 8}}"#).unwrap();
    let o = alreview(&[
        "ingest", &d("data/corpus.jsonl"), "--store", &d("store"), "--config", &d("svc.json"), "--embeddings",
        &d("data/embeddings.txt"),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = alreview(&["eval", "--store", &d("store")]);
    assert!(!o.status.success());
    let o = alreview(&["retrain", "--store", &d("store")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = alreview(&["export-curve", "--store", &d("store")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "setting,task,seed,round,labeled_count,micro_precision,micro_recall,micro_f1");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("live,aspect,"));
    assert!(alreview(&["eval", "--store", &d("store")]).status.success());
}
