#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;

use edcr::log::PredictionLog;
use edcr::rational::Rational;
use edcr::synth::{random_log, SizeBounds};

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// A random learning problem: log, target class, candidates, epsilon.
pub struct Instance {
    pub log: PredictionLog,
    pub alpha: String,
    pub candidates: BTreeSet<String>,
    pub epsilon: Rational,
}

pub fn learning_instance(seed: u64, max_conditions: usize) -> Instance {
    let bounds = SizeBounds {
        max_records: 60,
        max_labels: 3,
        max_conditions,
    };
    let log = random_log(seed, &bounds);
    let alpha = log
        .records()
        .iter()
        .find_map(|r| r.predicted.iter().next().cloned())
        .unwrap_or_else(|| "l0".to_string());
    let epsilons = [Rational::new(1, 10), Rational::new(1, 4), Rational::new(1, 2)];
    Instance {
        candidates: log.condition_universe().clone(),
        epsilon: epsilons[(seed % 3) as usize].clone(),
        alpha,
        log,
    }
}

pub struct Output {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn edcr(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_edcr"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap();
    Output {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// synth -> learn-detection -> apply -> eval inside `dir`, with relative
/// paths only, returning every file produced.
pub fn run_pipeline(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::write(dir.join("config.json"), fixture("planted_signal.json")).unwrap();
    let steps: [&[&str]; 4] = [
        &["synth", "--config", "config.json", "--seed", "5", "--out", "synth"],
        &[
            "learn-detection", "--log", "synth/log.jsonl", "--model", "m", "--class", "a",
            "--objective", "precision-gain", "--epsilon", "3/20", "--out", "learn",
        ],
        &["apply", "--log", "synth/log.jsonl", "--rules", "learn/rules.json", "--out", "apply"],
        &["eval", "--before", "synth/log.jsonl", "--after", "apply/log.jsonl", "--out", "eval"],
    ];
    for args in steps {
        let out = edcr(dir, args);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    }
    let mut files = BTreeMap::new();
    for stage in ["synth", "learn", "apply", "eval"] {
        for entry in std::fs::read_dir(dir.join(stage)).unwrap() {
            let path = entry.unwrap().path();
            let name = format!("{stage}/{}", path.file_name().unwrap().to_string_lossy());
            files.insert(name, std::fs::read(&path).unwrap());
        }
    }
    files
}
