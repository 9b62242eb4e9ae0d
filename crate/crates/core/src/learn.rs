//! Rule learning.
//!
//! Detection rules are grown greedily: starting from an empty body, each step
//! adds the candidate condition whose enlarged body scores best while keeping
//! the recall loss `R - R^body` within `epsilon`, and stops as soon as no
//! feasible candidate strictly improves the score. Ties go to the
//! lexicographically smallest condition id.
//!
//! Correction rules only admit a `(condition, trigger)` pair whose precision
//! for `beta` strictly beats the model's own precision for `beta`; otherwise
//! relabeling can only lower `beta` precision.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bitset::RecordSet;
use crate::error::{EdcrError, Result};
use crate::estimators::{f1, scope, BodyCounts, ConditionBody, MetricBundle};
use crate::log::PredictionLog;
use crate::rational::{Quantity, Rational};
use crate::rules::{CorrectionPair, CorrectionRule, DetectionRule};

/// Largest candidate set [`exhaustive_oracle`] accepts.
pub const ORACLE_LIMIT: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Objective {
    /// `P^body - P`
    PrecisionGain,
    /// `P(body | alpha in f) * P(alpha not in gt | alpha in f, body)`
    SupportTimesConfidence,
    /// F1 of the class after erasure.
    F1,
}

impl FromStr for Objective {
    type Err = EdcrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precision-gain" => Ok(Objective::PrecisionGain),
            "support-confidence" => Ok(Objective::SupportTimesConfidence),
            "f1" => Ok(Objective::F1),
            other => Err(EdcrError::Parse(format!(
                "unknown objective {other:?}; expected precision-gain, support-confidence, or f1"
            ))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::PrecisionGain => "precision-gain",
            Objective::SupportTimesConfidence => "support-confidence",
            Objective::F1 => "f1",
        })
    }
}

impl Objective {
    fn value(&self, c: &BodyCounts) -> Quantity {
        match self {
            Objective::PrecisionGain => c.rule_precision().value().sub(&c.precision().value()),
            Objective::SupportTimesConfidence => Quantity::weighted(&c.support().value(), &c.confidence().value()),
            Objective::F1 => f1(&c.rule_precision().value(), &c.rule_recall().value()),
        }
    }

    /// Score of the empty body, i.e. of leaving the model alone.
    fn baseline(&self, c: &BodyCounts) -> Quantity {
        match self {
            Objective::PrecisionGain => c.precision().value().sub(&c.precision().value()),
            Objective::SupportTimesConfidence => Quantity::from(Rational::zero()),
            Objective::F1 => f1(&c.precision().value(), &c.recall().value()),
        }
    }

    fn note(&self) -> Option<String> {
        matches!(self, Objective::F1)
            .then(|| "f1 objective is post-erasure F1 of the class, a stand-in for ratio-style F1 optimization".into())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnConfig {
    pub objective: Objective,
    /// Largest permitted recall reduction `R - R^body`.
    pub epsilon: Rational,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_body_size: Option<usize>,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            objective: Objective::PrecisionGain,
            epsilon: Rational::new(1, 20),
            max_body_size: None,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon < Rational::zero() {
            return Err(EdcrError::InvalidConfig("epsilon must be nonnegative".into()));
        }
        if self.max_body_size == Some(0) {
            return Err(EdcrError::InvalidConfig("max_body_size must be positive".into()));
        }
        Ok(())
    }

    fn size_limit(&self, candidates: usize) -> usize {
        self.max_body_size.unwrap_or(candidates).min(candidates)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoRuleReason {
    /// The class is never predicted (or, for corrections, no pair is defined).
    UndefinedBase,
    /// No candidate keeps the recall reduction within epsilon.
    Infeasible,
    /// No feasible candidate strictly improves the objective.
    NoImprovement,
    /// No pair beats the base precision of the target class.
    NoAdmissiblePair,
}

/// Per-candidate comparison of confidence against the residual `1 - P`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardRow {
    pub condition: String,
    pub support: Quantity,
    pub confidence: Quantity,
    pub residual: Quantity,
    /// `confidence > residual`, when both are defined.
    pub improving: Option<bool>,
    pub recall_reduction: Quantity,
    pub feasible: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearnStep {
    pub added: String,
    pub objective_before: Quantity,
    pub objective_after: Quantity,
    pub recall_reduction_after: Quantity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub model_id: String,
    pub alpha: String,
    pub objective: Objective,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective_note: Option<String>,
    pub epsilon: Rational,
    pub candidates: Vec<String>,
    pub guard: Vec<GuardRow>,
    pub steps: Vec<LearnStep>,
    pub rule: Option<DetectionRule>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<NoRuleReason>,
    pub objective_value: Quantity,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub final_metrics: Option<MetricBundle>,
}

impl DetectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

/// Precomputed record sets for one `(model, alpha)` and its candidates.
struct DetectionProblem {
    predicted: RecordSet,
    truth: RecordSet,
    candidates: Vec<(String, RecordSet)>,
}

impl DetectionProblem {
    fn new(log: &PredictionLog, model_id: &str, alpha: &str, candidates: &BTreeSet<String>) -> Result<Self> {
        if let Some(c) = candidates.iter().find(|c| !log.condition_universe().contains(*c)) {
            return Err(EdcrError::UnknownCondition {
                rule: "candidate set".into(),
                condition: c.clone(),
            });
        }
        let scope = scope(log, model_id, None);
        Ok(DetectionProblem {
            predicted: log.predicted_set(alpha).and(&scope),
            truth: log.truth_set(alpha).and(&scope),
            candidates: candidates.iter().map(|c| (c.clone(), log.condition_set(c))).collect(),
        })
    }

    fn counts(&self, body: &RecordSet) -> BodyCounts {
        let fired = self.predicted.and(body);
        BodyCounts {
            predicted: self.predicted.count(),
            predicted_correct: self.predicted.and_count(&self.truth),
            truth: self.truth.count(),
            fired_correct: fired.and_count(&self.truth),
            fired: fired.count(),
        }
    }

    fn empty(&self) -> RecordSet {
        RecordSet::empty(self.predicted.len())
    }

    fn union(&self, members: impl IntoIterator<Item = usize>) -> RecordSet {
        members
            .into_iter()
            .fold(self.empty(), |acc, i| acc.or(&self.candidates[i].1))
    }
}

fn feasible(counts: &BodyCounts, epsilon: &Rational) -> bool {
    counts
        .recall_reduction()
        .value()
        .value()
        .is_some_and(|r| r <= epsilon)
}

fn gt(a: &Quantity, b: &Quantity) -> bool {
    a.compare(b) == Some(std::cmp::Ordering::Greater)
}

pub fn learn_detection(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    candidates: &BTreeSet<String>,
    cfg: &LearnConfig,
) -> Result<(Option<DetectionRule>, DetectionReport)> {
    cfg.validate()?;
    let problem = DetectionProblem::new(log, model_id, alpha, candidates)?;
    let base = problem.counts(&problem.empty());

    let guard = problem
        .candidates
        .iter()
        .map(|(id, set)| {
            let c = problem.counts(set);
            let m = c.bundle();
            GuardRow {
                condition: id.clone(),
                improving: m.confidence.value().compare(&m.residual).map(|o| o.is_gt()),
                support: m.support.value(),
                confidence: m.confidence.value(),
                residual: m.residual,
                recall_reduction: c.recall_reduction().value(),
                feasible: feasible(&c, &cfg.epsilon),
            }
        })
        .collect();

    let mut report = DetectionReport {
        model_id: model_id.to_string(),
        alpha: alpha.to_string(),
        objective: cfg.objective,
        objective_note: cfg.objective.note(),
        epsilon: cfg.epsilon.clone(),
        candidates: candidates.iter().cloned().collect(),
        guard,
        steps: Vec::new(),
        rule: None,
        reason: None,
        objective_value: Quantity::Undefined,
        final_metrics: None,
    };

    if base.predicted == 0 {
        report.reason = Some(NoRuleReason::UndefinedBase);
        return Ok((None, report));
    }

    let mut chosen: Vec<usize> = Vec::new();
    let mut body_set = problem.empty();
    let mut current = cfg.objective.baseline(&base);
    report.objective_value = current.clone();
    let limit = cfg.size_limit(problem.candidates.len());

    while chosen.len() < limit {
        // Candidates are visited in id order; only a strictly better score
        // replaces the incumbent, so ties keep the smallest id.
        let mut best: Option<(usize, Quantity, BodyCounts, RecordSet)> = None;
        for (i, (_, set)) in problem.candidates.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let enlarged = body_set.or(set);
            let counts = problem.counts(&enlarged);
            if !feasible(&counts, &cfg.epsilon) {
                continue;
            }
            let value = cfg.objective.value(&counts);
            if !value.is_defined() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, v, _, _)| gt(&value, v)) {
                best = Some((i, value, counts, enlarged));
            }
        }
        let Some((i, value, counts, enlarged)) = best else {
            if chosen.is_empty() {
                report.reason = Some(NoRuleReason::Infeasible);
            }
            break;
        };
        if !gt(&value, &current) {
            if chosen.is_empty() {
                report.reason = Some(NoRuleReason::NoImprovement);
            }
            break;
        }
        report.steps.push(LearnStep {
            added: problem.candidates[i].0.clone(),
            objective_before: current.clone(),
            objective_after: value.clone(),
            recall_reduction_after: counts.recall_reduction().value(),
        });
        chosen.push(i);
        body_set = enlarged;
        current = value;
    }

    if chosen.is_empty() {
        return Ok((None, report));
    }
    let body = ConditionBody::new(chosen.iter().map(|&i| problem.candidates[i].0.clone()))?;
    let rule = DetectionRule::new(model_id, alpha, body);
    report.objective_value = current;
    report.final_metrics = Some(problem.counts(&body_set).bundle());
    report.rule = Some(rule.clone());
    Ok((Some(rule), report))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResult {
    pub body: ConditionBody,
    pub objective: Quantity,
    pub recall_reduction: Quantity,
}

/// Best feasible body over every nonempty subset of `candidates`, or `None`
/// when no subset strictly beats the empty body (the same outcome as the
/// greedy learner returning no rule).
///
/// Subsets are visited smallest first, then in lexicographic order of their
/// sorted ids; the first subset reaching the maximum score wins.
pub fn exhaustive_oracle(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    candidates: &BTreeSet<String>,
    cfg: &LearnConfig,
) -> Result<Option<OracleResult>> {
    if candidates.len() > ORACLE_LIMIT {
        return Err(EdcrError::TooManyCandidates {
            size: candidates.len(),
            limit: ORACLE_LIMIT,
        });
    }
    cfg.validate()?;
    let problem = DetectionProblem::new(log, model_id, alpha, candidates)?;
    let n = problem.candidates.len();
    let base = problem.counts(&problem.empty());
    if base.predicted == 0 {
        return Ok(None);
    }
    let baseline = cfg.objective.baseline(&base);
    let mut best: Option<(Vec<usize>, Quantity, Quantity)> = None;
    for k in 1..=cfg.size_limit(n) {
        for combo in Combinations::new(n, k) {
            let counts = problem.counts(&problem.union(combo.iter().copied()));
            if !feasible(&counts, &cfg.epsilon) {
                continue;
            }
            let value = cfg.objective.value(&counts);
            if !value.is_defined() {
                continue;
            }
            let incumbent = best.as_ref().map_or(&baseline, |(_, v, _)| v);
            if gt(&value, incumbent) {
                best = Some((combo, value, counts.recall_reduction().value()));
            }
        }
    }
    best.map(|(combo, objective, recall_reduction)| {
        Ok(OracleResult {
            body: ConditionBody::new(combo.into_iter().map(|i| problem.candidates[i].0.clone()))?,
            objective,
            recall_reduction,
        })
    })
    .transpose()
}

/// k-subsets of `0..n` in lexicographic order.
struct Combinations {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations {
            n,
            current: (k <= n).then(|| (0..k).collect()),
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let k = out.len();
        let mut next = out.clone();
        let mut i = k;
        loop {
            if i == 0 {
                self.current = None;
                break;
            }
            i -= 1;
            if next[i] < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRow {
    pub condition: String,
    pub trigger_class: String,
    /// `P(beta in gt | trigger in f, condition)`
    pub pair_precision: Quantity,
    pub admitted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionStep {
    pub added: CorrectionPair,
    pub combined_before: Quantity,
    pub combined_after: Quantity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionReport {
    pub model_id: String,
    pub beta: String,
    /// `P(beta in gt | beta in f)`
    pub base_precision: Quantity,
    pub pairs: Vec<PairRow>,
    pub steps: Vec<CorrectionStep>,
    pub rule: Option<CorrectionRule>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<NoRuleReason>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl CorrectionReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

/// Learns a correction rule for `beta` on the pre-detection log.
pub fn learn_correction(
    log: &PredictionLog,
    model_id: &str,
    beta: &str,
    candidate_pairs: &BTreeSet<CorrectionPair>,
    cfg: &LearnConfig,
) -> Result<(Option<CorrectionRule>, CorrectionReport)> {
    cfg.validate()?;
    for p in candidate_pairs {
        if !log.condition_universe().contains(&p.condition) {
            return Err(EdcrError::UnknownCondition {
                rule: "candidate pairs".into(),
                condition: p.condition.clone(),
            });
        }
        if !log.label_universe().contains(&p.trigger_class) {
            return Err(EdcrError::InvalidRule(format!("unknown trigger class {:?}", p.trigger_class)));
        }
    }
    let scope = scope(log, model_id, None);
    let beta_true = log.truth_set(beta).and(&scope);
    let beta_pred = log.predicted_set(beta).and(&scope);
    let base = Quantity::ratio(beta_pred.and_count(&beta_true), beta_pred.count());
    let precision_of = |set: &RecordSet| Quantity::ratio(set.and_count(&beta_true), set.count());

    let pair_sets: Vec<(CorrectionPair, RecordSet)> = candidate_pairs
        .iter()
        .map(|p| {
            let set = log
                .predicted_set(&p.trigger_class)
                .and(&scope)
                .and(&log.condition_set(&p.condition));
            (p.clone(), set)
        })
        .collect();

    let threshold = match &base {
        Quantity::Defined(_) => base.clone(),
        Quantity::Undefined => Quantity::from(Rational::zero()),
    };
    let mut notes = Vec::new();
    if !base.is_defined() {
        notes.push(format!("{beta:?} is never predicted; pairs need defined precision above 0"));
    }
    let rows: Vec<PairRow> = pair_sets
        .iter()
        .map(|(p, set)| {
            let pair_precision = precision_of(set);
            PairRow {
                condition: p.condition.clone(),
                trigger_class: p.trigger_class.clone(),
                admitted: gt(&pair_precision, &threshold),
                pair_precision,
            }
        })
        .collect();
    let admissible: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].admitted).collect();

    let mut report = CorrectionReport {
        model_id: model_id.to_string(),
        beta: beta.to_string(),
        base_precision: base,
        pairs: rows,
        steps: Vec::new(),
        rule: None,
        reason: None,
        notes,
    };
    if admissible.is_empty() {
        report.reason = Some(NoRuleReason::NoAdmissiblePair);
        return Ok((None, report));
    }

    let mut chosen: Vec<usize> = Vec::new();
    let mut body = RecordSet::empty(log.len());
    let mut current = Quantity::Undefined;
    let limit = cfg.size_limit(admissible.len());
    while chosen.len() < limit {
        let mut best: Option<(usize, Quantity, RecordSet)> = None;
        for &i in &admissible {
            if chosen.contains(&i) {
                continue;
            }
            let combined = body.or(&pair_sets[i].1);
            let value = precision_of(&combined);
            if best.as_ref().is_none_or(|(_, v, _)| gt(&value, v)) {
                best = Some((i, value, combined));
            }
        }
        let Some((i, value, combined)) = best else { break };
        if current.is_defined() && !gt(&value, &current) {
            break;
        }
        report.steps.push(CorrectionStep {
            added: pair_sets[i].0.clone(),
            combined_before: current.clone(),
            combined_after: value.clone(),
        });
        chosen.push(i);
        body = combined;
        current = value;
    }

    let rule = CorrectionRule::new(model_id, beta, chosen.iter().map(|&i| pair_sets[i].0.clone()))?;
    report.rule = Some(rule.clone());
    Ok((Some(rule), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::fixtures::log_a;
    use crate::log::PredictionRecord;

    fn q(n: i64, d: i64) -> Quantity {
        Quantity::from(Rational::new(n, d))
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    fn cfg(eps: Rational) -> LearnConfig {
        LearnConfig {
            objective: Objective::PrecisionGain,
            epsilon: eps,
            max_body_size: None,
        }
    }

    fn log_a_with_never() -> PredictionLog {
        let mut recs = log_a().into_records();
        // c_never exists in the universe but never with an "a" prediction
        recs[3].conditions.insert("c_never".into());
        PredictionLog::new(recs).unwrap()
    }

    #[test]
    fn learns_c1_on_reference_log() {
        let (rule, report) = learn_detection(&log_a(), "m", "a", &set(&["c1"]), &cfg(Rational::new(1, 2))).unwrap();
        let rule = rule.unwrap();
        assert_eq!(rule.body, ConditionBody::single("c1"));
        assert_eq!(report.objective_value, q(1, 3));
        assert_eq!(report.steps[0].recall_reduction_after, q(1, 3));
        assert_eq!(report.guard[0].improving, Some(true));
        assert_eq!(report.guard[0].confidence, q(1, 2));
        assert_eq!(report.guard[0].residual, q(1, 3));
    }

    #[test]
    fn tight_budget_gives_no_rule() {
        let (rule, report) = learn_detection(&log_a(), "m", "a", &set(&["c1"]), &cfg(Rational::new(1, 4))).unwrap();
        assert!(rule.is_none());
        assert_eq!(report.reason, Some(NoRuleReason::Infeasible));
    }

    #[test]
    fn zero_support_candidates_give_no_rule() {
        let (rule, report) =
            learn_detection(&log_a_with_never(), "m", "a", &set(&["c_never"]), &cfg(Rational::one())).unwrap();
        assert!(rule.is_none());
        assert_eq!(report.reason, Some(NoRuleReason::NoImprovement));
    }

    #[test]
    fn never_predicted_class_has_undefined_base() {
        let (rule, report) = learn_detection(&log_a(), "m", "zzz", &set(&["c1"]), &cfg(Rational::one())).unwrap();
        assert!(rule.is_none());
        assert_eq!(report.reason, Some(NoRuleReason::UndefinedBase));
    }

    #[test]
    fn unknown_candidate_rejected() {
        assert!(learn_detection(&log_a(), "m", "a", &set(&["nope"]), &LearnConfig::default()).is_err());
    }

    #[test]
    fn oracle_on_reference_log() {
        let r = exhaustive_oracle(&log_a(), "m", "a", &set(&["c1"]), &cfg(Rational::new(1, 2)))
            .unwrap()
            .unwrap();
        assert_eq!(r.body, ConditionBody::single("c1"));
        assert_eq!(r.objective, q(1, 3));

        assert!(exhaustive_oracle(&log_a(), "m", "a", &set(&["c1"]), &cfg(Rational::new(1, 4)))
            .unwrap()
            .is_none());
    }

    #[test]
    fn oracle_ignores_bodies_that_do_not_beat_the_empty_body() {
        let r = exhaustive_oracle(&log_a_with_never(), "m", "a", &set(&["c_never"]), &cfg(Rational::one())).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn oracle_tie_break_prefers_smaller_then_lexicographic() {
        // Subsets: {c1}: 1/3, {c_never}: 0, {c1, c_never}: 1/3.
        let r = exhaustive_oracle(&log_a_with_never(), "m", "a", &set(&["c_never", "c1"]), &cfg(Rational::new(1, 2)))
            .unwrap()
            .unwrap();
        assert_eq!(r.body, ConditionBody::single("c1"));
        assert_eq!(r.objective, q(1, 3));
    }

    #[test]
    fn oracle_rejects_large_candidate_sets() {
        let ids: BTreeSet<String> = (0..21).map(|i| format!("c{i}")).collect();
        assert!(matches!(
            exhaustive_oracle(&log_a(), "m", "a", &ids, &LearnConfig::default()),
            Err(EdcrError::TooManyCandidates { size: 21, .. })
        ));
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all: Vec<Vec<usize>> = Combinations::new(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(Combinations::new(3, 3).count(), 1);
        assert_eq!(Combinations::new(2, 3).count(), 0);
    }

    /// beta = "dodge". Pair (cu, toyota) has precision 3/4, base is 1/2.
    fn admissible_log() -> PredictionLog {
        let mut r = Vec::new();
        let mut push = |id: &str, pred: &[&str], gt: &[&str], conds: &[&str]| {
            r.push(PredictionRecord::new(id, "m", pred, gt, conds));
        };
        push("d1", &["dodge"], &["dodge"], &[]);
        push("d2", &["dodge"], &["ford"], &[]);
        push("t1", &["toyota"], &["dodge"], &["cu"]);
        push("t2", &["toyota"], &["dodge"], &["cu"]);
        push("t3", &["toyota"], &["dodge"], &["cu"]);
        push("t4", &["toyota"], &["toyota"], &["cu"]);
        push("f1", &["ford"], &["ford"], &["cj"]);
        push("f2", &["ford"], &["dodge"], &["cj"]);
        push("f3", &["ford"], &["ford"], &["cj"]);
        PredictionLog::new(r).unwrap()
    }

    #[test]
    fn correction_admits_only_the_strong_pair() {
        let pairs: BTreeSet<CorrectionPair> =
            [CorrectionPair::new("cu", "toyota"), CorrectionPair::new("cj", "ford")].into_iter().collect();
        let (rule, report) = learn_correction(&admissible_log(), "m", "dodge", &pairs, &LearnConfig::default()).unwrap();
        let rule = rule.unwrap();
        assert_eq!(rule.pairs, [CorrectionPair::new("cu", "toyota")].into_iter().collect());
        assert_eq!(report.base_precision, q(1, 2));
        let row = report.pairs.iter().find(|p| p.condition == "cu").unwrap();
        assert_eq!(row.pair_precision, q(3, 4));
        assert!(row.admitted);
        let row = report.pairs.iter().find(|p| p.condition == "cj").unwrap();
        assert_eq!(row.pair_precision, q(1, 3));
        assert!(!row.admitted);
    }

    #[test]
    fn correction_rejects_weak_only_pair() {
        let pairs: BTreeSet<CorrectionPair> = [CorrectionPair::new("cj", "ford")].into_iter().collect();
        let (rule, report) = learn_correction(&admissible_log(), "m", "dodge", &pairs, &LearnConfig::default()).unwrap();
        assert!(rule.is_none());
        assert_eq!(report.reason, Some(NoRuleReason::NoAdmissiblePair));
    }

    #[test]
    fn correction_for_unpredicted_beta_needs_positive_precision() {
        let pairs: BTreeSet<CorrectionPair> = [CorrectionPair::new("cu", "toyota")].into_iter().collect();
        let (rule, report) = learn_correction(&admissible_log(), "m", "toyota_new", &pairs, &LearnConfig::default()).unwrap();
        assert!(rule.is_none());
        assert_eq!(report.base_precision, Quantity::Undefined);
        assert!(!report.notes.is_empty());
    }
}
