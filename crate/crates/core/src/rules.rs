//! Detection and correction rules, and the erase-then-relabel pipeline.
//!
//! A detection rule `error(alpha) <- pred(alpha) & (c1 | c2 | ...)` erases
//! `alpha` from a record's prediction. A correction rule
//! `corr(beta) <- (c & pred(alpha)) | ...` adds `beta` to records that lost at
//! least one label during detection. Correction triggers are tested against
//! the original prediction, before erasure.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{EdcrError, Result};
use crate::estimators::{f1, ConditionBody};
use crate::log::PredictionLog;
use crate::rational::Quantity;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRule {
    pub model_id: String,
    pub target_class: String,
    #[serde(rename = "conditions")]
    pub body: ConditionBody,
}

impl DetectionRule {
    pub fn new(model_id: impl Into<String>, target_class: impl Into<String>, body: ConditionBody) -> Self {
        DetectionRule {
            model_id: model_id.into(),
            target_class: target_class.into(),
            body,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectionPair {
    pub condition: String,
    pub trigger_class: String,
}

impl CorrectionPair {
    pub fn new(condition: impl Into<String>, trigger_class: impl Into<String>) -> Self {
        CorrectionPair {
            condition: condition.into(),
            trigger_class: trigger_class.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCorrection")]
pub struct CorrectionRule {
    pub model_id: String,
    pub target_class: String,
    pub pairs: BTreeSet<CorrectionPair>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrection {
    model_id: String,
    target_class: String,
    pairs: Vec<CorrectionPair>,
}

impl TryFrom<RawCorrection> for CorrectionRule {
    type Error = EdcrError;

    fn try_from(raw: RawCorrection) -> Result<Self> {
        let n = raw.pairs.len();
        let pairs: BTreeSet<CorrectionPair> = raw.pairs.into_iter().collect();
        if pairs.len() != n {
            return Err(EdcrError::InvalidRule("duplicate correction pair".into()));
        }
        CorrectionRule::new(raw.model_id, raw.target_class, pairs)
    }
}

impl CorrectionRule {
    pub fn new(
        model_id: impl Into<String>,
        target_class: impl Into<String>,
        pairs: impl IntoIterator<Item = CorrectionPair>,
    ) -> Result<Self> {
        let pairs: BTreeSet<CorrectionPair> = pairs.into_iter().collect();
        if pairs.is_empty() {
            return Err(EdcrError::InvalidRule("correction rule needs at least one pair".into()));
        }
        Ok(CorrectionRule {
            model_id: model_id.into(),
            target_class: target_class.into(),
            pairs,
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSet {
    pub detections: Vec<DetectionRule>,
    pub corrections: Vec<CorrectionRule>,
}

impl RuleSet {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("rule serialization is infallible");
        s.push('\n');
        s
    }

    /// Rejects rules that mention a condition the log never contains.
    pub fn validate_against(&self, log: &PredictionLog) -> Result<()> {
        let known = log.condition_universe();
        for (i, d) in self.detections.iter().enumerate() {
            if let Some(c) = d.body.ids().iter().find(|c| !known.contains(*c)) {
                return Err(EdcrError::UnknownCondition {
                    rule: format!("detection #{i}"),
                    condition: c.clone(),
                });
            }
        }
        for (i, r) in self.corrections.iter().enumerate() {
            if let Some(p) = r.pairs.iter().find(|p| !known.contains(&p.condition)) {
                return Err(EdcrError::UnknownCondition {
                    rule: format!("correction #{i}"),
                    condition: p.condition.clone(),
                });
            }
        }
        Ok(())
    }

    /// `(detection index, correction index)` pairs where a correction re-adds
    /// the label a detection erases for the same model.
    pub fn canceling_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, d) in self.detections.iter().enumerate() {
            for (j, c) in self.corrections.iter().enumerate() {
                if d.model_id == c.model_id && d.target_class == c.target_class {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Erasure {
    pub label: String,
    pub rule: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Addition {
    pub label: String,
    /// Indices of every correction rule that fired for this label.
    pub rules: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub record: usize,
    pub sample_id: String,
    pub model_id: String,
    pub erased: Vec<Erasure>,
    pub added: Vec<Addition>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub conflict: Option<BTreeSet<String>>,
}

impl TraceEntry {
    pub fn erased_labels(&self) -> BTreeSet<&str> {
        self.erased.iter().map(|e| e.label.as_str()).collect()
    }
}

/// Per-record events, only for records that something happened to.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplicationTrace {
    pub entries: Vec<TraceEntry>,
}

impl ApplicationTrace {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, record: usize) -> Option<&TraceEntry> {
        self.entries
            .binary_search_by_key(&record, |e| e.record)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn conflicts(&self) -> usize {
        self.entries.iter().filter(|e| e.conflict.is_some()).count()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serialization is infallible");
        s.push('\n');
        s
    }
}

pub fn apply_detection(log: &PredictionLog, rules: &RuleSet) -> Result<(PredictionLog, ApplicationTrace)> {
    rules.validate_against(log)?;
    let mut records = log.records().to_vec();
    let mut trace = ApplicationTrace::default();
    for (i, record) in records.iter_mut().enumerate() {
        let mut erased = BTreeSet::new();
        for (j, rule) in rules.detections.iter().enumerate() {
            if rule.model_id == record.model_id
                && record.predicted.contains(&rule.target_class)
                && rule.body.ids().iter().any(|c| record.conditions.contains(c))
            {
                erased.insert(Erasure {
                    label: rule.target_class.clone(),
                    rule: j,
                });
            }
        }
        if erased.is_empty() {
            continue;
        }
        for e in &erased {
            record.predicted.remove(&e.label);
        }
        trace.entries.push(TraceEntry {
            record: i,
            sample_id: record.sample_id.clone(),
            model_id: record.model_id.clone(),
            erased: erased.into_iter().collect(),
            added: Vec::new(),
            conflict: None,
        });
    }
    Ok((PredictionLog::new(records)?, trace))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorrectionOptions {
    /// Only records with at least one erasure may be relabeled.
    pub require_erasure: bool,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        CorrectionOptions { require_erasure: true }
    }
}

fn same_keys(a: &PredictionLog, b: &PredictionLog) -> Result<()> {
    if a.len() != b.len() {
        return Err(EdcrError::KeyMismatch(format!("{} vs {} records", a.len(), b.len())));
    }
    for (x, y) in a.records().iter().zip(b.records()) {
        if x.sample_id != y.sample_id || x.model_id != y.model_id {
            return Err(EdcrError::KeyMismatch(format!(
                "record ({}, {}) vs ({}, {})",
                x.sample_id, x.model_id, y.sample_id, y.model_id
            )));
        }
    }
    Ok(())
}

pub fn apply_correction(
    detected: &PredictionLog,
    trace: &ApplicationTrace,
    original: &PredictionLog,
    rules: &RuleSet,
    options: CorrectionOptions,
) -> Result<(PredictionLog, ApplicationTrace)> {
    rules.validate_against(original)?;
    same_keys(detected, original)?;
    let mut records = detected.records().to_vec();
    let mut entries: BTreeMap<usize, TraceEntry> =
        trace.entries.iter().map(|e| (e.record, e.clone())).collect();

    for (i, record) in records.iter_mut().enumerate() {
        if options.require_erasure && !entries.get(&i).is_some_and(|e| !e.erased.is_empty()) {
            continue;
        }
        let source = &original.records()[i];
        let mut targets: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (j, rule) in rules.corrections.iter().enumerate() {
            if rule.model_id != source.model_id {
                continue;
            }
            let fires = rule.pairs.iter().any(|p| {
                source.conditions.contains(&p.condition) && source.predicted.contains(&p.trigger_class)
            });
            if fires {
                targets.entry(rule.target_class.as_str()).or_default().push(j);
            }
        }
        if targets.is_empty() {
            continue;
        }
        let entry = entries.entry(i).or_insert_with(|| TraceEntry {
            record: i,
            sample_id: record.sample_id.clone(),
            model_id: record.model_id.clone(),
            erased: Vec::new(),
            added: Vec::new(),
            conflict: None,
        });
        if targets.len() > 1 {
            entry.conflict = Some(targets.keys().map(|s| s.to_string()).collect());
            continue;
        }
        let (label, fired) = targets.into_iter().next().expect("one target");
        if record.predicted.insert(label.to_string()) {
            entry.added.push(Addition {
                label: label.to_string(),
                rules: fired,
            });
        }
    }
    let trace = ApplicationTrace {
        entries: entries
            .into_values()
            .filter(|e| !e.erased.is_empty() || !e.added.is_empty() || e.conflict.is_some())
            .collect(),
    };
    Ok((PredictionLog::new(records)?, trace))
}

/// Detection followed by correction with default options.
pub fn apply_rules(log: &PredictionLog, rules: &RuleSet) -> Result<(PredictionLog, ApplicationTrace)> {
    let (detected, trace) = apply_detection(log, rules)?;
    apply_correction(&detected, &trace, log, rules, CorrectionOptions::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RowStatus {
    Ok,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub model_id: String,
    pub label: String,
    pub precision_before: Quantity,
    pub precision_after: Quantity,
    pub recall_before: Quantity,
    pub recall_after: Quantity,
    pub f1_before: Quantity,
    pub f1_after: Quantity,
    pub delta_precision: Quantity,
    pub delta_recall: Quantity,
    pub delta_f1: Quantity,
    pub status: RowStatus,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaTable {
    pub rows: Vec<DeltaRow>,
}

impl DeltaTable {
    pub fn row(&self, model_id: &str, label: &str) -> Option<&DeltaRow> {
        self.rows.iter().find(|r| r.model_id == model_id && r.label == label)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("delta serialization is infallible");
        s.push('\n');
        s
    }
}

fn precision_recall(log: &PredictionLog, model_id: &str, label: &str) -> (Quantity, Quantity) {
    let scope = log.model_set(model_id);
    let predicted = log.predicted_set(label).and(&scope);
    let truth = log.truth_set(label).and(&scope);
    let hits = predicted.and_count(&truth);
    (
        Quantity::ratio(hits, predicted.count()),
        Quantity::ratio(hits, truth.count()),
    )
}

/// Per-(model, label) precision, recall, and F1 before and after a rewrite.
/// Both logs must hold the same records with the same ground truth.
pub fn evaluate_delta(before: &PredictionLog, after: &PredictionLog) -> Result<DeltaTable> {
    let (kb, ka) = (before.keyed(), after.keyed());
    if kb.len() != ka.len() {
        return Err(EdcrError::KeyMismatch(format!("{} vs {} records", kb.len(), ka.len())));
    }
    let mut labels: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (key, rb) in &kb {
        let ra = ka.get(key).ok_or_else(|| {
            EdcrError::KeyMismatch(format!("({}, {}) missing from after-log", key.0, key.1))
        })?;
        if rb.ground_truth != ra.ground_truth {
            return Err(EdcrError::KeyMismatch(format!(
                "ground truth differs for ({}, {})",
                key.0, key.1
            )));
        }
        let set = labels.entry(key.1).or_default();
        set.extend(rb.predicted.iter().map(String::as_str));
        set.extend(ra.predicted.iter().map(String::as_str));
        set.extend(rb.ground_truth.iter().map(String::as_str));
    }

    let mut rows = Vec::new();
    for (model, labels) in labels {
        for label in labels {
            let (pb, rb) = precision_recall(before, model, label);
            let (pa, ra) = precision_recall(after, model, label);
            let (fb, fa) = (f1(&pb, &rb), f1(&pa, &ra));
            let delta_precision = pa.sub(&pb);
            rows.push(DeltaRow {
                model_id: model.to_string(),
                label: label.to_string(),
                status: if delta_precision.is_defined() { RowStatus::Ok } else { RowStatus::Skipped },
                delta_recall: ra.sub(&rb),
                delta_f1: fa.sub(&fb),
                delta_precision,
                precision_before: pb,
                precision_after: pa,
                recall_before: rb,
                recall_after: ra,
                f1_before: fb,
                f1_after: fa,
            });
        }
    }
    Ok(DeltaTable { rows })
}
