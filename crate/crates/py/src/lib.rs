//! Python bindings. Structured results cross the boundary as plain dicts and
//! lists with exact rationals kept as "num/den" strings, which
//! `fractions.Fraction` parses directly.

use std::collections::BTreeSet;

use edcr::error::EdcrError;
use edcr::estimators::{self, ConditionBody};
use edcr::learn::{self, LearnConfig, Objective};
use edcr::log::{self, PredictionLog};
use edcr::rational::Rational;
use edcr::rules::{self, CorrectionPair, RuleSet};
use edcr::synth::{self, SizeBounds, SynthConfig};
use edcr::theorems::{self, SweepConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyTuple;
use serde::Serialize;

fn err(e: EdcrError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn body(conditions: Vec<String>) -> PyResult<ConditionBody> {
    ConditionBody::new(conditions).map_err(err)
}

fn learn_config(objective: &str, epsilon: &str, max_body_size: Option<usize>) -> PyResult<LearnConfig> {
    let cfg = LearnConfig {
        objective: objective.parse::<Objective>().map_err(err)?,
        epsilon: epsilon.parse::<Rational>().map_err(err)?,
        max_body_size,
    };
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

/// A validated prediction log.
#[pyclass(name = "PredictionLog", frozen)]
struct PyLog(PredictionLog);

#[pymethods]
impl PyLog {
    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        log::load_log(text).map(PyLog).map_err(err)
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        log::load_log_file(&path).map(PyLog).map_err(err)
    }

    fn to_jsonl(&self) -> String {
        self.0.to_jsonl()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn labels(&self) -> Vec<String> {
        self.0.label_universe().iter().cloned().collect()
    }

    fn conditions(&self) -> Vec<String> {
        self.0.condition_universe().iter().cloned().collect()
    }

    fn distributions(&self) -> Vec<String> {
        self.0.distribution_universe().iter().cloned().collect()
    }

    fn model_ids(&self) -> Vec<String> {
        self.0.model_ids().into_iter().collect()
    }

    fn __repr__(&self) -> String {
        format!("PredictionLog(records={}, labels={})", self.0.len(), self.0.label_universe().len())
    }
}

#[pyfunction]
#[pyo3(signature = (log, model_id, alpha, conditions, distribution=None))]
fn metric_bundle<'py>(
    py: Python<'py>,
    log: &PyLog,
    model_id: &str,
    alpha: &str,
    conditions: Vec<String>,
    distribution: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    let m = estimators::metric_bundle_in(&log.0, model_id, alpha, &body(conditions)?, distribution);
    to_py(py, &m)
}

#[pyfunction]
fn invariance_profile<'py>(
    py: Python<'py>,
    log: &PyLog,
    model_id: &str,
    alpha: &str,
    conditions: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &estimators::invariance_profile(&log.0, model_id, alpha, &body(conditions)?))
}

/// Every theorem check; the reclassification limit runs only when `beta` is given.
#[pyfunction]
#[pyo3(signature = (log, model_id, alpha, conditions, beta=None))]
fn verify<'py>(
    py: Python<'py>,
    log: &PyLog,
    model_id: &str,
    alpha: &str,
    conditions: Vec<String>,
    beta: Option<&str>,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &theorems::verify_all(&log.0, model_id, alpha, beta, &body(conditions)?))
}

/// Same checks as `verify`, rendered as a plain-text table.
#[pyfunction]
#[pyo3(signature = (log, model_id, alpha, conditions, beta=None))]
fn verify_table(log: &PyLog, model_id: &str, alpha: &str, conditions: Vec<String>, beta: Option<&str>) -> PyResult<String> {
    let reports = theorems::verify_all(&log.0, model_id, alpha, beta, &body(conditions)?);
    Ok(edcr::report::report_render(&reports))
}

/// Returns `(rule_set_json or None, report)`.
#[pyfunction]
#[pyo3(signature = (log, model_id, alpha, candidates=None, objective="precision-gain", epsilon="1/20", max_body_size=None))]
fn learn_detection<'py>(
    py: Python<'py>,
    log: &PyLog,
    model_id: &str,
    alpha: &str,
    candidates: Option<Vec<String>>,
    objective: &str,
    epsilon: &str,
    max_body_size: Option<usize>,
) -> PyResult<Bound<'py, PyTuple>> {
    let cfg = learn_config(objective, epsilon, max_body_size)?;
    let cands: BTreeSet<String> = match candidates {
        Some(c) => c.into_iter().collect(),
        None => log.0.condition_universe().clone(),
    };
    let (rule, report) = learn::learn_detection(&log.0, model_id, alpha, &cands, &cfg).map_err(err)?;
    let rules = rule.map(|r| {
        RuleSet {
            detections: vec![r],
            corrections: Vec::new(),
        }
        .to_json()
    });
    PyTuple::new(py, [rules.into_pyobject(py)?.into_any(), to_py(py, &report)?])
}

/// `pairs` is a list of `(condition, trigger_class)`. Returns `(rule_set_json or None, report)`.
#[pyfunction]
#[pyo3(signature = (log, model_id, beta, pairs, max_body_size=None))]
fn learn_correction<'py>(
    py: Python<'py>,
    log: &PyLog,
    model_id: &str,
    beta: &str,
    pairs: Vec<(String, String)>,
    max_body_size: Option<usize>,
) -> PyResult<Bound<'py, PyTuple>> {
    let cfg = LearnConfig {
        max_body_size,
        ..LearnConfig::default()
    };
    let pairs: BTreeSet<CorrectionPair> = pairs.into_iter().map(|(c, t)| CorrectionPair::new(c, t)).collect();
    let (rule, report) = learn::learn_correction(&log.0, model_id, beta, &pairs, &cfg).map_err(err)?;
    let rules = rule.map(|r| {
        RuleSet {
            detections: Vec::new(),
            corrections: vec![r],
        }
        .to_json()
    });
    PyTuple::new(py, [rules.into_pyobject(py)?.into_any(), to_py(py, &report)?])
}

/// Returns `(transformed_log, trace)`.
#[pyfunction]
fn apply_rules<'py>(py: Python<'py>, log: &PyLog, rules_json: &str) -> PyResult<(PyLog, Bound<'py, PyAny>)> {
    let rule_set = RuleSet::from_json(rules_json).map_err(err)?;
    let (after, trace) = rules::apply_rules(&log.0, &rule_set).map_err(err)?;
    Ok((PyLog(after), to_py(py, &trace)?))
}

#[pyfunction]
fn evaluate_delta<'py>(py: Python<'py>, before: &PyLog, after: &PyLog) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &rules::evaluate_delta(&before.0, &after.0).map_err(err)?)
}

/// Returns `(log, bookkeeping)`.
#[pyfunction]
fn generate<'py>(py: Python<'py>, config_json: &str) -> PyResult<(PyLog, Bound<'py, PyAny>)> {
    let cfg = SynthConfig::from_json(config_json).map_err(err)?;
    let (log, book) = synth::generate(&cfg).map_err(err)?;
    Ok((PyLog(log), to_py(py, &book)?))
}

#[pyfunction]
#[pyo3(signature = (seed, max_records=30, max_labels=4, max_conditions=3))]
fn random_log(seed: u64, max_records: usize, max_labels: usize, max_conditions: usize) -> PyResult<PyLog> {
    let bounds = SizeBounds {
        max_records,
        max_labels,
        max_conditions,
    };
    bounds.validate().map_err(err)?;
    Ok(PyLog(synth::random_log(seed, &bounds)))
}

#[pyfunction]
#[pyo3(signature = (seed, trials, max_records=30, max_labels=4, max_conditions=3))]
fn sweep<'py>(
    py: Python<'py>,
    seed: u64,
    trials: u64,
    max_records: usize,
    max_labels: usize,
    max_conditions: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let cfg = SweepConfig {
        seed,
        trials,
        bounds: SizeBounds {
            max_records,
            max_labels,
            max_conditions,
        },
    };
    to_py(py, &theorems::sweep(&cfg).map_err(err)?)
}

#[pymodule]
fn pyedcr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLog>()?;
    m.add_function(wrap_pyfunction!(metric_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(invariance_profile, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(verify_table, m)?)?;
    m.add_function(wrap_pyfunction!(learn_detection, m)?)?;
    m.add_function(wrap_pyfunction!(learn_correction, m)?)?;
    m.add_function(wrap_pyfunction!(apply_rules, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_delta, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(random_log, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    Ok(())
}
