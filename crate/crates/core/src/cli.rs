//! Batch command-line frontend.
//!
//! Every subcommand reads files, writes its outputs into `--out`, and finishes
//! by writing `manifest.json` listing input digests, seeds, the effective
//! configuration, and the files it produced.
//!
//! Exit codes: 0 success, 1 a theorem was VIOLATED (replay files written),
//! 2 input or validation error, 3 every requested check was SKIPPED.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{EdcrError, Result};
use crate::estimators::ConditionBody;
use crate::learn::{learn_correction, learn_detection, LearnConfig, Objective};
use crate::log::{load_log, PredictionLog};
use crate::rational::Rational;
use crate::report::{render_sweep, report_render};
use crate::rules::{apply_rules, evaluate_delta, CorrectionPair, RuleSet};
use crate::synth::{generate, SizeBounds, SynthConfig};
use crate::theorems::{sweep, verify_all, SweepConfig, TheoremVerdict};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ALL_SKIPPED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "edcr", version, about = "Learn, apply, and check error detecting and correcting rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic log from a SynthConfig.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a detection rule for one class.
    LearnDetection {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long = "class")]
        class: String,
        /// Candidate condition; defaults to every condition in the log.
        #[arg(long = "condition")]
        conditions: Vec<String>,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a correction rule assigning `--target-class`.
    LearnCorrection {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long = "target-class")]
        target_class: String,
        /// Trigger class; defaults to every other label in the log.
        #[arg(long = "trigger-class")]
        trigger_classes: Vec<String>,
        #[arg(long = "condition")]
        conditions: Vec<String>,
        /// Existing rule file to extend with the learned correction.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[command(flatten)]
        learn: LearnArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply a rule file to a log.
    Apply {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        rules: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class metric deltas between two logs over the same records.
    Eval {
        #[arg(long)]
        before: PathBuf,
        #[arg(long)]
        after: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every theorem check for one (model, class, body).
    Verify {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        model: String,
        #[arg(long = "class")]
        class: String,
        /// Body condition; repeat for a disjunctive body.
        #[arg(long = "condition", required = true)]
        conditions: Vec<String>,
        /// Class reassigned by the correction; enables the reclassification check.
        #[arg(long = "target-class")]
        target_class: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every check over seeded random logs.
    Sweep {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        trials: u64,
        /// SizeBounds file; defaults to 30 records, 4 labels, 3 conditions.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct LearnArgs {
    /// LearnConfig file; the flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["precision-gain", "support-confidence", "f1"])]
    objective: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub seeds: Vec<u64>,
    pub config: Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub const FILE: &'static str = "manifest.json";

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialization is infallible");
        s.push('\n');
        s
    }
}

struct Run {
    out: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(command: &str, out: &Path) -> Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Run {
            out: out.to_path_buf(),
            manifest: RunManifest {
                command: command.to_string(),
                inputs: Vec::new(),
                seeds: Vec::new(),
                config: Value::Null,
                outputs: Vec::new(),
            },
        })
    }

    fn read(&mut self, role: &str, path: &Path) -> Result<String> {
        let bytes = fs::read(path).map_err(|e| EdcrError::Parse(format!("cannot read {}: {e}", path.display())))?;
        self.manifest.inputs.push(InputDigest {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        String::from_utf8(bytes).map_err(|_| EdcrError::Parse(format!("{} is not UTF-8", path.display())))
    }

    fn read_log(&mut self, role: &str, path: &Path) -> Result<PredictionLog> {
        load_log(&self.read(role, path)?)
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.out.join(name), contents)?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.outputs.push(RunManifest::FILE.to_string());
        fs::write(self.out.join(RunManifest::FILE), self.manifest.to_json())?;
        Ok(())
    }
}

fn resolve_learn_config(run: &mut Run, args: &LearnArgs) -> Result<LearnConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = run.read("config", path)?;
            serde_json::from_str(&text)?
        }
        None => LearnConfig::default(),
    };
    if let Some(o) = &args.objective {
        cfg.objective = o.parse::<Objective>()?;
    }
    if let Some(e) = &args.epsilon {
        cfg.epsilon = e.parse::<Rational>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn candidates(log: &PredictionLog, given: &[String]) -> BTreeSet<String> {
    if given.is_empty() {
        log.condition_universe().clone()
    } else {
        given.iter().cloned().collect()
    }
}

fn check_conditions(log: &PredictionLog, ids: &[String], origin: &str) -> Result<()> {
    match ids.iter().find(|c| !log.condition_universe().contains(*c)) {
        Some(c) => Err(EdcrError::UnknownCondition {
            rule: origin.to_string(),
            condition: c.clone(),
        }),
        None => Ok(()),
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Synth { config, seed, out } => {
            let mut run = Run::new("synth", &out)?;
            let mut cfg = SynthConfig::from_json(&run.read("config", &config)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let (log, book) = generate(&cfg)?;
            run.manifest.seeds.push(cfg.seed);
            run.manifest.config = serde_json::to_value(&cfg)?;
            run.write("log.jsonl", &log.to_jsonl())?;
            run.write("bookkeeping.json", &book.to_json())?;
            run.finish()?;
            println!("synth: {} records", log.len());
            Ok(EXIT_OK)
        }
        Command::LearnDetection {
            log,
            model,
            class,
            conditions,
            learn,
            out,
        } => {
            let mut run = Run::new("learn-detection", &out)?;
            let log = run.read_log("log", &log)?;
            let cfg = resolve_learn_config(&mut run, &learn)?;
            let cands = candidates(&log, &conditions);
            let (rule, report) = learn_detection(&log, &model, &class, &cands, &cfg)?;
            run.manifest.config = json!({
                "model": model,
                "class": class,
                "candidates": cands,
                "learn": cfg,
            });
            let rules = RuleSet {
                detections: rule.iter().cloned().collect(),
                corrections: Vec::new(),
            };
            run.write("rules.json", &rules.to_json())?;
            run.write("learn_report.json", &report.to_json())?;
            run.finish()?;
            match rule {
                Some(r) => println!("learn-detection: body {:?}", r.body.ids()),
                None => println!("learn-detection: no rule ({})", reason_code(report.reason)),
            }
            Ok(EXIT_OK)
        }
        Command::LearnCorrection {
            log,
            model,
            target_class,
            trigger_classes,
            conditions,
            rules,
            learn,
            out,
        } => {
            let mut run = Run::new("learn-correction", &out)?;
            let log = run.read_log("log", &log)?;
            let mut rule_set = match &rules {
                Some(path) => RuleSet::from_json(&run.read("rules", path)?)?,
                None => RuleSet::default(),
            };
            let cfg = resolve_learn_config(&mut run, &learn)?;
            let triggers: BTreeSet<String> = if trigger_classes.is_empty() {
                log.label_universe().iter().filter(|l| **l != target_class).cloned().collect()
            } else {
                trigger_classes.into_iter().collect()
            };
            let conds = candidates(&log, &conditions);
            let pairs: BTreeSet<CorrectionPair> = conds
                .iter()
                .flat_map(|c| triggers.iter().map(move |t| CorrectionPair::new(c.clone(), t.clone())))
                .collect();
            let (rule, report) = learn_correction(&log, &model, &target_class, &pairs, &cfg)?;
            run.manifest.config = json!({
                "model": model,
                "target_class": target_class,
                "candidate_pairs": pairs,
                "learn": cfg,
            });
            if let Some(r) = &rule {
                rule_set.corrections.push(r.clone());
            }
            rule_set.validate_against(&log)?;
            run.write("rules.json", &rule_set.to_json())?;
            run.write("learn_report.json", &report.to_json())?;
            run.finish()?;
            match rule {
                Some(r) => println!("learn-correction: {} pair(s)", r.pairs.len()),
                None => println!("learn-correction: no rule ({})", reason_code(report.reason)),
            }
            Ok(EXIT_OK)
        }
        Command::Apply { log, rules, out } => {
            let mut run = Run::new("apply", &out)?;
            let log = run.read_log("log", &log)?;
            let rule_set = RuleSet::from_json(&run.read("rules", &rules)?)?;
            let (after, trace) = apply_rules(&log, &rule_set)?;
            let canceling = rule_set.canceling_pairs();
            run.manifest.config = json!({ "rules": rule_set, "canceling_pairs": canceling });
            run.write("log.jsonl", &after.to_jsonl())?;
            run.write("trace.json", &trace.to_json())?;
            run.finish()?;
            println!("apply: {} record(s) touched, {} conflict(s)", trace.entries.len(), trace.conflicts());
            for (d, c) in canceling {
                println!("apply: detection #{d} and correction #{c} act on the same label and can cancel");
            }
            Ok(EXIT_OK)
        }
        Command::Eval { before, after, out } => {
            let mut run = Run::new("eval", &out)?;
            let before = run.read_log("before", &before)?;
            let after = run.read_log("after", &after)?;
            let delta = evaluate_delta(&before, &after)?;
            run.write("delta.json", &delta.to_json())?;
            run.finish()?;
            println!("eval: {} row(s)", delta.rows.len());
            Ok(EXIT_OK)
        }
        Command::Verify {
            log,
            model,
            class,
            conditions,
            target_class,
            out,
        } => {
            let mut run = Run::new("verify", &out)?;
            let log_text = run.read("log", &log)?;
            let log = load_log(&log_text)?;
            check_conditions(&log, &conditions, "--condition")?;
            let body = ConditionBody::new(conditions.iter().cloned())?;
            let reports = verify_all(&log, &model, &class, target_class.as_deref(), &body);
            run.manifest.config = json!({
                "model": model,
                "class": class,
                "body": body,
                "target_class": target_class,
            });
            let mut doc = serde_json::to_string_pretty(&reports)?;
            doc.push('\n');
            run.write("reports.json", &doc)?;
            run.write("reports.txt", &report_render(&reports))?;
            let violated = reports.iter().any(|r| r.verdict == TheoremVerdict::Violated);
            let all_skipped = reports.iter().all(|r| r.verdict == TheoremVerdict::Skipped);
            if violated {
                run.write("replay.jsonl", &log_text)?;
            }
            run.finish()?;
            print!("{}", report_render(&reports));
            Ok(if violated {
                EXIT_VIOLATED
            } else if all_skipped {
                EXIT_ALL_SKIPPED
            } else {
                EXIT_OK
            })
        }
        Command::Sweep {
            seed,
            trials,
            config,
            out,
        } => {
            let mut run = Run::new("sweep", &out)?;
            let bounds: SizeBounds = match &config {
                Some(path) => serde_json::from_str(&run.read("config", path)?)?,
                None => SizeBounds::default(),
            };
            let cfg = SweepConfig { seed, trials, bounds };
            let table = sweep(&cfg)?;
            run.manifest.seeds.push(seed);
            run.manifest.config = serde_json::to_value(&cfg)?;
            run.write("sweep.json", &table.to_json())?;
            run.write("sweep.txt", &render_sweep(&table))?;
            for v in &table.violations {
                run.write(&format!("replay_trial_{}.jsonl", v.trial), &v.log_jsonl)?;
            }
            run.finish()?;
            print!("{}", render_sweep(&table));
            Ok(if table.passed() { EXIT_OK } else { EXIT_VIOLATED })
        }
    }
}

/// Parses `argv` (including the program name) and runs one subcommand.
fn reason_code<T: serde::Serialize>(reason: Option<T>) -> String {
    match reason.map(serde_json::to_value) {
        Some(Ok(serde_json::Value::String(s))) => s,
        _ => "UNKNOWN".into(),
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
