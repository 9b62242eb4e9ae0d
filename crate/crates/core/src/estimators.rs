//! Conditional-frequency estimators over prediction logs.
//!
//! All probabilities are exact ratios of record counts. A ratio whose
//! conditioning event has no records is undefined rather than an error.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitset::RecordSet;
use crate::error::{EdcrError, Result};
use crate::log::{EventQuery, Literal, PredictionLog};
use crate::rational::{Quantity, Rational};

/// Empirical conditional probability with the counts behind it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Probability {
    pub numerator_count: u64,
    pub denominator_count: u64,
}

impl Probability {
    pub fn new(numerator_count: u64, denominator_count: u64) -> Self {
        debug_assert!(numerator_count <= denominator_count);
        Probability {
            numerator_count,
            denominator_count,
        }
    }

    pub fn value(&self) -> Quantity {
        Quantity::ratio(self.numerator_count, self.denominator_count)
    }

    pub fn is_defined(&self) -> bool {
        self.denominator_count > 0
    }
}

impl fmt::Display for Probability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.value().fmt(f)
    }
}

/// Disjunctive body of a rule: satisfied when any listed condition holds.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "BTreeSet<String>", into = "BTreeSet<String>")]
pub struct ConditionBody(BTreeSet<String>);

impl ConditionBody {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = ids.into_iter().map(Into::into).collect();
        Self::try_from(set)
    }

    pub fn single(id: impl Into<String>) -> Self {
        ConditionBody([id.into()].into_iter().collect())
    }

    pub fn ids(&self) -> &BTreeSet<String> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with(&self, id: &str) -> ConditionBody {
        let mut set = self.0.clone();
        set.insert(id.to_string());
        ConditionBody(set)
    }

    pub fn query(&self) -> EventQuery {
        EventQuery::any_condition(&self.0)
    }

    /// Conjunction "no body condition holds".
    pub fn none_query(&self) -> EventQuery {
        EventQuery::conjunction(self.0.iter().map(|c| Literal::NotCondition(c.clone())))
    }

    pub(crate) fn record_set(&self, log: &PredictionLog) -> RecordSet {
        log.any_condition_set(&self.0)
    }
}

impl TryFrom<BTreeSet<String>> for ConditionBody {
    type Error = EdcrError;

    fn try_from(set: BTreeSet<String>) -> Result<Self> {
        if set.is_empty() {
            return Err(EdcrError::InvalidRule("condition body must be nonempty".into()));
        }
        if set.iter().any(|s| s.is_empty()) {
            return Err(EdcrError::InvalidRule("condition ids must be nonempty".into()));
        }
        Ok(ConditionBody(set))
    }
}

impl From<ConditionBody> for BTreeSet<String> {
    fn from(b: ConditionBody) -> Self {
        b.0
    }
}

impl fmt::Display for ConditionBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.0.iter().map(String::as_str).collect();
        write!(f, "{{{}}}", ids.join(" | "))
    }
}

/// `P(event | given)` on the whole log.
pub fn cond_prob(log: &PredictionLog, event: &EventQuery, given: &EventQuery) -> Probability {
    let denominator = log.count(given);
    let numerator = log.count(&event.and_query(given));
    Probability::new(numerator, denominator)
}

/// Raw counts for one `(model, class, body)` triple within a scope of records.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct BodyCounts {
    /// alpha predicted
    pub predicted: u64,
    /// alpha predicted and correct
    pub predicted_correct: u64,
    /// alpha in ground truth
    pub truth: u64,
    /// alpha predicted and some body condition holds
    pub fired: u64,
    /// fired and correct
    pub fired_correct: u64,
}

impl BodyCounts {
    pub fn compute(log: &PredictionLog, scope: &RecordSet, alpha: &str, body: &RecordSet) -> Self {
        let predicted = log.predicted_set(alpha).and(scope);
        let truth = log.truth_set(alpha).and(scope);
        let predicted_correct = predicted.and(&truth);
        let fired = predicted.and(body);
        BodyCounts {
            predicted: predicted.count(),
            predicted_correct: predicted_correct.count(),
            truth: truth.count(),
            fired_correct: fired.and_count(&truth),
            fired: fired.count(),
        }
    }

    pub fn fired_wrong(&self) -> u64 {
        self.fired - self.fired_correct
    }

    pub fn kept(&self) -> u64 {
        self.predicted - self.fired
    }

    pub fn kept_correct(&self) -> u64 {
        self.predicted_correct - self.fired_correct
    }

    pub fn precision(&self) -> Probability {
        Probability::new(self.predicted_correct, self.predicted)
    }

    pub fn recall(&self) -> Probability {
        Probability::new(self.predicted_correct, self.truth)
    }

    pub fn rule_precision(&self) -> Probability {
        Probability::new(self.kept_correct(), self.kept())
    }

    pub fn rule_recall(&self) -> Probability {
        Probability::new(self.kept_correct(), self.truth)
    }

    pub fn support(&self) -> Probability {
        Probability::new(self.fired, self.predicted)
    }

    pub fn confidence(&self) -> Probability {
        Probability::new(self.fired_wrong(), self.fired)
    }

    /// `P(alpha in gt | alpha predicted, body)`.
    pub fn fired_precision(&self) -> Probability {
        Probability::new(self.fired_correct, self.fired)
    }

    /// `R_alpha - R_alpha^body`, the share of true alpha samples erased.
    pub fn recall_reduction(&self) -> Probability {
        Probability::new(self.fired_correct, self.truth)
    }

    pub fn bundle(&self) -> MetricBundle {
        let precision = self.precision();
        let support = self.support();
        let k_factor = support.value().div(&support.value().one_minus());
        let residual = precision.value().one_minus();
        MetricBundle {
            recall: self.recall(),
            rule_precision: self.rule_precision(),
            rule_recall: self.rule_recall(),
            confidence: self.confidence(),
            precision,
            support,
            k_factor,
            residual,
        }
    }
}

/// Every per-class quantity the precision and recall identities use.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricBundle {
    pub precision: Probability,
    pub recall: Probability,
    pub rule_precision: Probability,
    pub rule_recall: Probability,
    pub support: Probability,
    pub confidence: Probability,
    pub k_factor: Quantity,
    pub residual: Quantity,
}

pub(crate) fn scope(log: &PredictionLog, model_id: &str, distribution: Option<&str>) -> RecordSet {
    let models = log.model_set(model_id);
    match distribution {
        Some(d) => models.and(&log.distribution_set(d)),
        None => models,
    }
}

pub fn metric_bundle(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    body: &ConditionBody,
) -> MetricBundle {
    metric_bundle_in(log, model_id, alpha, body, None)
}

/// [`metric_bundle`] restricted to one distribution tag.
pub fn metric_bundle_in(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    body: &ConditionBody,
    distribution: Option<&str>,
) -> MetricBundle {
    let scope = scope(log, model_id, distribution);
    BodyCounts::compute(log, &scope, alpha, &body.record_set(log)).bundle()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Yes,
    No,
    Undefined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Yes => "YES",
            Verdict::No => "NO",
            Verdict::Undefined => "UNDEFINED",
        })
    }
}

pub(crate) fn error_detecting_from(counts: &BodyCounts) -> Verdict {
    let with_body = counts.fired_precision().value();
    let base = counts.precision().value();
    match with_body.compare(&base) {
        Some(std::cmp::Ordering::Greater) => Verdict::No,
        Some(_) => Verdict::Yes,
        None => Verdict::Undefined,
    }
}

/// Whether `body` is error detecting for `(model_id, alpha)` on the given
/// distribution slice, or on the pooled log when `distribution` is `None`.
pub fn is_error_detecting(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    body: &ConditionBody,
    distribution: Option<&str>,
) -> Verdict {
    let scope = scope(log, model_id, distribution);
    error_detecting_from(&BodyCounts::compute(log, &scope, alpha, &body.record_set(log)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceRow {
    pub distribution: String,
    pub verdict: Verdict,
    pub confidence: Quantity,
    /// `|confidence - pooled confidence|`
    pub gap: Quantity,
    pub residual: Quantity,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvarianceProfile {
    pub model_id: String,
    pub alpha: String,
    pub body: ConditionBody,
    pub pooled_confidence: Quantity,
    pub rows: Vec<InvarianceRow>,
    /// True iff every defined row verdict is YES.
    pub invariant: bool,
}

pub fn invariance_profile(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    body: &ConditionBody,
) -> InvarianceProfile {
    let body_set = body.record_set(log);
    let pooled = BodyCounts::compute(log, &scope(log, model_id, None), alpha, &body_set);
    let pooled_confidence = pooled.confidence().value();
    let rows: Vec<InvarianceRow> = log
        .distribution_universe()
        .iter()
        .map(|tag| {
            let counts = BodyCounts::compute(log, &scope(log, model_id, Some(tag)), alpha, &body_set);
            let confidence = counts.confidence().value();
            InvarianceRow {
                distribution: tag.clone(),
                verdict: error_detecting_from(&counts),
                gap: confidence.abs_diff(&pooled_confidence),
                residual: counts.precision().value().one_minus(),
                confidence,
            }
        })
        .collect();
    let invariant = rows.iter().all(|r| r.verdict != Verdict::No);
    InvarianceProfile {
        model_id: model_id.to_string(),
        alpha: alpha.to_string(),
        body: body.clone(),
        pooled_confidence,
        rows,
        invariant,
    }
}

/// F1 from exact precision and recall; undefined when either is undefined
/// or both are zero.
pub fn f1(precision: &Quantity, recall: &Quantity) -> Quantity {
    let two = Quantity::from(Rational::integer(2));
    two.mul(&precision.mul(recall)).div(&precision.add(recall))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::fixtures::log_a;
    use crate::log::PredictionRecord;

    fn q(n: i64, d: i64) -> Quantity {
        Quantity::from(Rational::new(n, d))
    }

    #[test]
    fn cond_prob_on_reference_log() {
        let log = log_a();
        let pred = EventQuery::literal(Literal::Predicted("a".into()));
        let gt = EventQuery::literal(Literal::InTruth("a".into()));
        assert_eq!(cond_prob(&log, &gt, &pred).value(), q(2, 3));
        assert_eq!(cond_prob(&log, &pred, &gt).value(), q(2, 3));
        let never = EventQuery::literal(Literal::Predicted("zzz".into()));
        assert_eq!(cond_prob(&log, &gt, &never).value(), Quantity::Undefined);
    }

    #[test]
    fn bundle_on_reference_log() {
        let m = metric_bundle(&log_a(), "m", "a", &ConditionBody::single("c1"));
        assert_eq!(m.precision.value(), q(2, 3));
        assert_eq!(m.recall.value(), q(2, 3));
        assert_eq!(m.support.value(), q(2, 3));
        assert_eq!(m.confidence.value(), q(1, 2));
        assert_eq!(m.rule_precision.value(), q(1, 1));
        assert_eq!(m.rule_recall.value(), q(1, 3));
        assert_eq!(m.k_factor, q(2, 1));
        assert_eq!(m.residual, q(1, 3));
    }

    #[test]
    fn vacuous_body_changes_nothing() {
        let m = metric_bundle(&log_a(), "m", "a", &ConditionBody::single("c_never"));
        assert_eq!(m.rule_precision.value(), m.precision.value());
        assert_eq!(m.rule_recall.value(), m.recall.value());
        assert_eq!(m.support.value(), q(0, 1));
        assert_eq!(m.k_factor, q(0, 1));
        assert_eq!(m.confidence.value(), Quantity::Undefined);
    }

    #[test]
    fn full_support_leaves_rule_precision_undefined() {
        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c1"]),
            PredictionRecord::new("2", "m", &["a"], &["b"], &["c1"]),
        ])
        .unwrap();
        let m = metric_bundle(&log, "m", "a", &ConditionBody::single("c1"));
        assert_eq!(m.rule_precision.value(), Quantity::Undefined);
        assert_eq!(m.k_factor, Quantity::Undefined);
    }

    #[test]
    fn error_detecting_verdicts() {
        let log = log_a();
        assert_eq!(is_error_detecting(&log, "m", "a", &ConditionBody::single("c1"), None), Verdict::Yes);

        // c_good only on correct predictions while precision is 2/3.
        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c_good"]),
            PredictionRecord::new("2", "m", &["a"], &["a"], &[]),
            PredictionRecord::new("3", "m", &["a"], &["b"], &[]),
        ])
        .unwrap();
        assert_eq!(is_error_detecting(&log, "m", "a", &ConditionBody::single("c_good"), None), Verdict::No);
        assert_eq!(is_error_detecting(&log, "m", "zzz", &ConditionBody::single("c_good"), None), Verdict::Undefined);
    }

    #[test]
    fn equality_counts_as_error_detecting() {
        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c"]),
            PredictionRecord::new("2", "m", &["a"], &["b"], &["c"]),
        ])
        .unwrap();
        assert_eq!(is_error_detecting(&log, "m", "a", &ConditionBody::single("c"), None), Verdict::Yes);
    }

    #[test]
    fn invariance_over_two_tags() {
        let mut records = Vec::new();
        for (tag, off) in [("d1", 0), ("d2", 10)] {
            records.push(PredictionRecord::new(format!("{}", off), "m".into(), &["a"], &["a"], &[]).with_distribution(tag));
            records.push(PredictionRecord::new(format!("{}", off + 1), "m".into(), &["a"], &["b"], &["c"]).with_distribution(tag));
        }
        let log = PredictionLog::new(records).unwrap();
        let p = invariance_profile(&log, "m", "a", &ConditionBody::single("c"));
        assert!(p.invariant);
        assert_eq!(p.rows.len(), 2);
        assert!(p.rows.iter().all(|r| r.verdict == Verdict::Yes));
        assert!(p.rows.iter().all(|r| r.gap == q(0, 1)));
    }

    #[test]
    fn single_untagged_distribution_gives_one_row() {
        let p = invariance_profile(&log_a(), "m", "a", &ConditionBody::single("c1"));
        assert_eq!(p.rows.len(), 1);
        assert_eq!(p.rows[0].distribution, "default");
        assert_eq!(p.invariant, p.rows[0].verdict == Verdict::Yes);
    }

    #[test]
    fn empty_body_rejected() {
        assert!(ConditionBody::new(Vec::<String>::new()).is_err());
        assert!(serde_json::from_str::<ConditionBody>("[]").is_err());
    }
}
