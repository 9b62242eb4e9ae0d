mod common;

use common::{edcr, fixture, run_pipeline};
use serde_json::Value;

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("log_a.jsonl"), fixture("log_a.jsonl")).unwrap();
    dir
}

fn read_json(path: std::path::PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_reference_log() {
    let dir = setup();
    let out = edcr(dir.path(), &["verify", "--log", "log_a.jsonl", "--model", "m", "--class", "a", "--condition", "c1", "--out", "v"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let reports = read_json(dir.path().join("v/reports.json"));
    let t1 = &reports[0];
    assert_eq!(t1["theorem_id"], "T1_PRECISION_CHANGE");
    assert_eq!(t1["verdict"], "HOLDS");
    assert_eq!(t1["intermediates"]["LHS"], "1/3");
    assert_eq!(t1["intermediates"]["RHS"], "1/3");
    assert!(out.stdout.contains("0.333333333333"));

    let manifest = read_json(dir.path().join("v/manifest.json"));
    assert_eq!(manifest["command"], "verify");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["outputs"], serde_json::json!(["reports.json", "reports.txt", "manifest.json"]));
}

#[test]
fn verify_unpredicted_class_is_all_skipped() {
    let dir = setup();
    let out = edcr(dir.path(), &["verify", "--log", "log_a.jsonl", "--model", "m", "--class", "zzz", "--condition", "c1", "--target-class", "b", "--out", "v"]);
    assert_eq!(out.code, 3);
    let reports = read_json(dir.path().join("v/reports.json"));
    assert!(reports.as_array().unwrap().iter().all(|r| r["verdict"] == "SKIPPED"));
}

#[test]
fn unknown_condition_in_rules_is_an_input_error() {
    let dir = setup();
    std::fs::write(
        dir.path().join("rules.json"),
        r#"{"detections":[{"model_id":"m","target_class":"a","conditions":["c_missing"]}],"corrections":[]}"#,
    )
    .unwrap();
    let out = edcr(dir.path(), &["apply", "--log", "log_a.jsonl", "--rules", "rules.json", "--out", "a"]);
    assert_eq!(out.code, 2);
    assert!(out.stderr.contains("c_missing"), "{}", out.stderr);
}

#[test]
fn input_errors_exit_two() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.jsonl"), "{\"sample_id\":\"x\"}\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["verify", "--log", "bad.jsonl", "--model", "m", "--class", "a", "--condition", "c1", "--out", "o"],
        &["verify", "--log", "missing.jsonl", "--model", "m", "--class", "a", "--condition", "c1", "--out", "o"],
        &["verify", "--log", "log_a.jsonl", "--model", "m", "--class", "a", "--condition", "c9", "--out", "o"],
        &["sweep", "--seed", "1", "--trials", "0", "--out", "o"],
        &["learn-detection", "--log", "log_a.jsonl", "--model", "m", "--class", "a", "--epsilon", "x/y", "--out", "o"],
    ];
    for args in cases {
        assert_eq!(edcr(dir.path(), args).code, 2, "{args:?}");
    }
    assert_eq!(edcr(dir.path(), &["frobnicate"]).code, 2);
}

#[test]
fn learn_then_apply_reference_log() {
    let dir = setup();
    let out = edcr(dir.path(), &["learn-detection", "--log", "log_a.jsonl", "--model", "m", "--class", "a", "--condition", "c1", "--epsilon", "1/2", "--out", "l"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let report = read_json(dir.path().join("l/learn_report.json"));
    assert_eq!(report["objective_value"], "1/3");
    let out = edcr(dir.path(), &["apply", "--log", "log_a.jsonl", "--rules", "l/rules.json", "--out", "a"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let after = std::fs::read_to_string(dir.path().join("a/log.jsonl")).unwrap();
    assert_eq!(after.lines().filter(|l| l.contains("\"predicted\":[\"a\"]")).count(), 1);
    let out = edcr(dir.path(), &["eval", "--before", "log_a.jsonl", "--after", "a/log.jsonl", "--out", "e"]);
    assert_eq!(out.code, 0);
    let delta = read_json(dir.path().join("e/delta.json"));
    let row = delta["rows"].as_array().unwrap().iter().find(|r| r["label"] == "a").unwrap();
    assert_eq!(row["delta_precision"], "1/3");
    assert_eq!(row["delta_recall"], "-1/3");
}

#[test]
fn learn_correction_extends_rule_file() {
    let dir = setup();
    std::fs::write(
        dir.path().join("rules.json"),
        r#"{"detections":[{"model_id":"m","target_class":"a","conditions":["c1"]}],"corrections":[]}"#,
    )
    .unwrap();
    let out = edcr(dir.path(), &["learn-correction", "--log", "log_a.jsonl", "--model", "m", "--target-class", "b", "--trigger-class", "a", "--rules", "rules.json", "--out", "c"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let rules = read_json(dir.path().join("c/rules.json"));
    assert_eq!(rules["detections"].as_array().unwrap().len(), 1);
    // pair precision 1/2 does not beat base precision 1 for b
    assert!(rules["corrections"].as_array().unwrap().is_empty());
    let report = read_json(dir.path().join("c/learn_report.json"));
    assert_eq!(report["reason"], "NO_ADMISSIBLE_PAIR");
}

#[test]
fn sweep_writes_aggregate() {
    let dir = setup();
    let out = edcr(dir.path(), &["sweep", "--seed", "1", "--trials", "50", "--out", "s"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let table = read_json(dir.path().join("s/sweep.json"));
    assert_eq!(table["violations"].as_array().unwrap().len(), 0);
    let again = edcr(dir.path(), &["sweep", "--seed", "1", "--trials", "50", "--out", "s2"]);
    assert_eq!(again.stdout, out.stdout);
    assert_eq!(
        std::fs::read(dir.path().join("s/sweep.json")).unwrap(),
        std::fs::read(dir.path().join("s2/sweep.json")).unwrap()
    );
}

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run_pipeline(a.path());
    let second = run_pipeline(b.path());
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (name, bytes) in &first {
        assert!(second[name] == *bytes, "{name} differs");
    }
}
