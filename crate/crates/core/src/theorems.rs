//! Exact checks of the precision, recall, and reclassification results on
//! finite logs.
//!
//! Identities (precision change, the conditional-precision rewrite, recall
//! reduction) are algebraic facts about counts, so with exact arithmetic a
//! `VIOLATED` verdict on them means this crate is wrong. Implications and
//! equivalences are checked the same way on every defined case. Any check
//! whose inputs touch an empty conditioning event is `SKIPPED` with the
//! reason recorded.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{EdcrError, Result};
use crate::estimators::{error_detecting_from, scope, BodyCounts, ConditionBody, Verdict};
use crate::log::PredictionLog;
use crate::rational::{Quantity, Rational};
use crate::synth::{random_log, DetRng, SizeBounds, SplitMix64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TheoremId {
    #[serde(rename = "T1_PRECISION_CHANGE")]
    PrecisionChange,
    #[serde(rename = "CLAIM1_APPENDIX")]
    ConditionalPrecisionRewrite,
    #[serde(rename = "T2_EDNS")]
    ErrorDetectionEquivalence,
    #[serde(rename = "T3_RECALL_REDUCTION")]
    RecallReduction,
    #[serde(rename = "T4_RECLASS_LIMIT")]
    ReclassificationLimit,
    #[serde(rename = "COROLLARY_SUPPORT_BOUND")]
    SupportBound,
    #[serde(rename = "EQ7_RESIDUAL")]
    ResidualCondition,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::PrecisionChange,
        TheoremId::ConditionalPrecisionRewrite,
        TheoremId::ErrorDetectionEquivalence,
        TheoremId::RecallReduction,
        TheoremId::ReclassificationLimit,
        TheoremId::SupportBound,
        TheoremId::ResidualCondition,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            TheoremId::PrecisionChange => "T1_PRECISION_CHANGE",
            TheoremId::ConditionalPrecisionRewrite => "CLAIM1_APPENDIX",
            TheoremId::ErrorDetectionEquivalence => "T2_EDNS",
            TheoremId::RecallReduction => "T3_RECALL_REDUCTION",
            TheoremId::ReclassificationLimit => "T4_RECLASS_LIMIT",
            TheoremId::SupportBound => "COROLLARY_SUPPORT_BOUND",
            TheoremId::ResidualCondition => "EQ7_RESIDUAL",
        }
    }

    /// True for statements that are identities of counts.
    pub fn is_identity(&self) -> bool {
        matches!(
            self,
            TheoremId::PrecisionChange | TheoremId::ConditionalPrecisionRewrite | TheoremId::RecallReduction
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TheoremVerdict {
    Holds,
    Violated,
    Skipped,
}

impl fmt::Display for TheoremVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TheoremVerdict::Holds => "HOLDS",
            TheoremVerdict::Violated => "VIOLATED",
            TheoremVerdict::Skipped => "SKIPPED",
        })
    }
}

/// Which conditioning event was empty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SkipReason {
    NoAlphaPredictions,
    FullSupport,
    ZeroSupport,
    NoAlphaTruth,
    ZeroPrecision,
    NoErrors,
    NoBetaPredictions,
    NoPairRecords,
    OverlappingEvents,
}

impl SkipReason {
    pub fn describe(&self) -> &'static str {
        match self {
            SkipReason::NoAlphaPredictions => "no record predicts alpha, so P(. | alpha in f) has a zero denominator",
            SkipReason::FullSupport => "the body holds on every alpha prediction, so P(. | alpha in f, body false) has a zero denominator",
            SkipReason::ZeroSupport => "the body never holds on an alpha prediction, so P(. | alpha in f, body) has a zero denominator",
            SkipReason::NoAlphaTruth => "no record has alpha in ground truth, so recall has a zero denominator",
            SkipReason::ZeroPrecision => "alpha is never predicted correctly, so dividing by precision is undefined",
            SkipReason::NoErrors => "alpha is never predicted wrongly, so P(. | alpha not in gt, alpha in f) has a zero denominator",
            SkipReason::NoBetaPredictions => "no record predicts beta, so P(beta in gt | beta in f) has a zero denominator",
            SkipReason::NoPairRecords => "no record has alpha predicted with the body true",
            SkipReason::OverlappingEvents => "beta in f and (alpha in f, body) share records; the limit assumes they are disjoint",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.describe())
    }
}

/// Ordered `name -> value` map; serializes as a JSON object in insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Intermediates(Vec<(String, Quantity)>);

impl Intermediates {
    pub fn push(&mut self, name: &str, value: Quantity) {
        self.0.push((name.to_string(), value));
    }

    pub fn get(&self, name: &str) -> Option<&Quantity> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Quantity)> {
        self.0.iter().map(|(n, v)| (n.as_str(), v))
    }

    pub fn names(&self) -> Vec<&str> {
        self.0.iter().map(|(n, _)| n.as_str()).collect()
    }
}

impl Serialize for Intermediates {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Intermediates {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Intermediates;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of name to \"num/den\"")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<Intermediates, A::Error> {
                let mut out = Intermediates::default();
                while let Some((k, v)) = access.next_entry::<String, Quantity>()? {
                    out.0.push((k, v));
                }
                Ok(out)
            }
        }
        deserializer.deserialize_map(V)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckInputs {
    pub model_id: String,
    pub alpha: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<String>,
    pub body: ConditionBody,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem_id: TheoremId,
    pub inputs: CheckInputs,
    pub intermediates: Intermediates,
    pub verdict: TheoremVerdict,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub skip_reason: Option<SkipReason>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn value(&self, name: &str) -> Option<&Quantity> {
        self.intermediates.get(name)
    }
}

fn flag(b: bool) -> Quantity {
    Quantity::from(Rational::integer(b as i64))
}

/// Counts for `(model, alpha, body)` pooled over distributions.
struct Context {
    inputs: CheckInputs,
    counts: BodyCounts,
}

impl Context {
    fn new(log: &PredictionLog, model_id: &str, alpha: &str, beta: Option<&str>, body: &ConditionBody) -> Self {
        let scope = scope(log, model_id, None);
        Context {
            inputs: CheckInputs {
                model_id: model_id.to_string(),
                alpha: alpha.to_string(),
                beta: beta.map(str::to_string),
                body: body.clone(),
            },
            counts: BodyCounts::compute(log, &scope, alpha, &body.record_set(log)),
        }
    }

    /// First empty conditioning event among those the check relies on.
    fn first_missing(&self, needs: &[SkipReason]) -> Option<SkipReason> {
        let c = &self.counts;
        needs.iter().copied().find(|r| match r {
            SkipReason::NoAlphaPredictions => c.predicted == 0,
            SkipReason::FullSupport => c.kept() == 0,
            SkipReason::ZeroSupport => c.fired == 0,
            SkipReason::NoAlphaTruth => c.truth == 0,
            SkipReason::ZeroPrecision => c.predicted_correct == 0,
            SkipReason::NoErrors => c.predicted == c.predicted_correct,
            _ => false,
        })
    }

    fn report(
        &self,
        theorem_id: TheoremId,
        intermediates: Intermediates,
        outcome: Option<bool>,
        needs: &[SkipReason],
    ) -> TheoremReport {
        let (verdict, skip_reason) = match outcome {
            Some(true) => (TheoremVerdict::Holds, None),
            Some(false) => (TheoremVerdict::Violated, None),
            None => (
                TheoremVerdict::Skipped,
                Some(self.first_missing(needs).unwrap_or(SkipReason::NoAlphaPredictions)),
            ),
        };
        TheoremReport {
            theorem_id,
            inputs: self.inputs.clone(),
            intermediates,
            verdict,
            skip_reason,
            notes: Vec::new(),
        }
    }
}

fn equal(a: &Quantity, b: &Quantity) -> Option<bool> {
    a.compare(b).map(|o| o.is_eq())
}

/// `P^c - P = K (confidence - (1 - P))` with `K = support / (1 - support)`.
pub fn check_precision_change(log: &PredictionLog, model_id: &str, alpha: &str, body: &ConditionBody) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let m = ctx.counts.bundle();
    let (p, pc) = (m.precision.value(), m.rule_precision.value());
    let confidence = m.confidence.value();
    let lhs = pc.sub(&p);
    let rhs = Quantity::weighted(&m.k_factor, &confidence.sub(&m.residual));

    let mut iv = Intermediates::default();
    iv.push("P_alpha", p);
    iv.push("P_alpha^c", pc);
    iv.push("K", m.k_factor.clone());
    iv.push("support", m.support.value());
    iv.push("confidence", confidence);
    iv.push("residual", m.residual.clone());
    iv.push("LHS", lhs.clone());
    iv.push("RHS", rhs.clone());
    ctx.report(
        TheoremId::PrecisionChange,
        iv,
        equal(&lhs, &rhs),
        &[SkipReason::NoAlphaPredictions, SkipReason::FullSupport],
    )
}

/// `P^c = (P - P(alpha in gt | alpha in f, body) * support) / (1 - support)`.
pub fn check_conditional_precision(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    body: &ConditionBody,
) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let c = &ctx.counts;
    let p = c.precision().value();
    let support = c.support().value();
    let fired_precision = c.fired_precision().value();
    let lhs = c.rule_precision().value();
    let rhs = p
        .sub(&Quantity::weighted(&support, &fired_precision))
        .div(&support.one_minus());

    let mut iv = Intermediates::default();
    iv.push("P_alpha", p);
    iv.push("P(alpha in gt | alpha in f, body)", fired_precision);
    iv.push("support", support.clone());
    iv.push("1 - support", support.one_minus());
    iv.push("LHS", lhs.clone());
    iv.push("RHS", rhs.clone());
    ctx.report(
        TheoremId::ConditionalPrecisionRewrite,
        iv,
        equal(&lhs, &rhs),
        &[SkipReason::NoAlphaPredictions, SkipReason::FullSupport],
    )
}

/// The body is error detecting iff `P^c >= P`.
pub fn check_edns(log: &PredictionLog, model_id: &str, alpha: &str, body: &ConditionBody) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let c = &ctx.counts;
    let m = c.bundle();
    let detecting = error_detecting_from(c);
    let (p, pc) = (m.precision.value(), m.rule_precision.value());
    let keeps_precision = pc.compare(&p).map(|o| o.is_ge());

    let mut iv = Intermediates::default();
    iv.push("P(alpha in gt | alpha in f, body)", c.fired_precision().value());
    iv.push("P_alpha", p);
    iv.push("P_alpha^c", pc);
    iv.push("support", m.support.value());
    iv.push("confidence", m.confidence.value());
    iv.push("residual", m.residual.clone());
    iv.push("K", m.k_factor.clone());

    let outcome = match (detecting, keeps_precision) {
        (Verdict::Undefined, _) | (_, None) => None,
        (v, Some(ge)) => {
            iv.push("error_detecting", flag(v == Verdict::Yes));
            iv.push("P_alpha^c >= P_alpha", flag(ge));
            Some((v == Verdict::Yes) == ge)
        }
    };
    ctx.report(
        TheoremId::ErrorDetectionEquivalence,
        iv,
        outcome,
        &[SkipReason::NoAlphaPredictions, SkipReason::ZeroSupport, SkipReason::FullSupport],
    )
}

/// `R - R^c = P(alpha in gt | alpha in f, body) P(body | alpha in f) R / P`.
pub fn check_recall_reduction(log: &PredictionLog, model_id: &str, alpha: &str, body: &ConditionBody) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let c = &ctx.counts;
    let recall = c.recall().value();
    let precision = c.precision().value();
    let fired_precision = c.fired_precision().value();
    let support = c.support().value();
    let lhs = recall.sub(&c.rule_recall().value());
    let rhs = Quantity::weighted(&support, &fired_precision)
        .mul(&recall)
        .div(&precision);

    let mut iv = Intermediates::default();
    iv.push("R_alpha", recall.clone());
    iv.push("R_alpha^c", c.rule_recall().value());
    iv.push("P(alpha in gt | alpha in f, body)", fired_precision);
    iv.push("P(body | alpha in f)", support.clone());
    iv.push("P(alpha in f | alpha in gt)", recall);
    iv.push("P(alpha in gt | alpha in f)", precision);
    iv.push("P_alpha", c.precision().value());
    iv.push("support", support);
    iv.push("LHS", lhs.clone());
    iv.push("RHS", rhs.clone());
    ctx.report(
        TheoremId::RecallReduction,
        iv,
        equal(&lhs, &rhs),
        &[SkipReason::NoAlphaTruth, SkipReason::NoAlphaPredictions, SkipReason::ZeroPrecision],
    )
}

/// If `P(beta in gt | alpha in f, body) <= P(beta in gt | beta in f)` then
/// `P(beta in gt | beta in f) >= P(beta in gt | beta in f or (alpha in f, body))`.
///
/// The limit is stated for reclassified records that the model did not
/// already label `beta`; when the two events share records the check is
/// skipped, and the intermediates still report whether the implication
/// happened to hold.
pub fn check_reclassification_limit(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    beta: &str,
    body: &ConditionBody,
) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, Some(beta), body);
    let scope = scope(log, model_id, None);
    let beta_pred = log.predicted_set(beta).and(&scope);
    let beta_true = log.truth_set(beta).and(&scope);
    let pair = log.predicted_set(alpha).and(&scope).and(&body.record_set(log));
    let union = beta_pred.or(&pair);

    let base = Quantity::ratio(beta_pred.and_count(&beta_true), beta_pred.count());
    let pair_precision = Quantity::ratio(pair.and_count(&beta_true), pair.count());
    let union_precision = Quantity::ratio(union.and_count(&beta_true), union.count());
    let overlap = beta_pred.and_count(&pair);

    let mut iv = Intermediates::default();
    iv.push("P(beta in gt | alpha in f, body)", pair_precision.clone());
    iv.push("P(beta in gt | beta in f)", base.clone());
    iv.push("P(beta in gt | beta in f or (alpha in f, body))", union_precision.clone());
    iv.push("overlap", Quantity::from(Rational::from_counts(overlap, 1)));

    let hypothesis = pair_precision.compare(&base).map(|o| o.is_le());
    let conclusion = base.compare(&union_precision).map(|o| o.is_ge());
    let implication = match (hypothesis, conclusion) {
        (Some(h), Some(c)) => {
            iv.push("hypothesis", flag(h));
            iv.push("conclusion", flag(c));
            Some(!h || c)
        }
        _ => None,
    };
    if let Some(i) = implication {
        iv.push("implication_holds", flag(i));
    }

    let skip = if beta_pred.count() == 0 {
        Some(SkipReason::NoBetaPredictions)
    } else if pair.count() == 0 {
        Some(SkipReason::NoPairRecords)
    } else if overlap > 0 {
        Some(SkipReason::OverlappingEvents)
    } else {
        None
    };
    let mut report = ctx.report(TheoremId::ReclassificationLimit, iv, None, &[]);
    report.skip_reason = skip;
    report.verdict = match (skip, implication) {
        (None, Some(true)) => TheoremVerdict::Holds,
        (None, Some(false)) => TheoremVerdict::Violated,
        _ => TheoremVerdict::Skipped,
    };
    if hypothesis == Some(false) && skip.is_none() {
        report.notes.push("hypothesis not met; holds vacuously".into());
    }
    report
}

/// An error-detecting body has `P(body | alpha in f) <= P(body | alpha not in gt, alpha in f)`.
pub fn check_support_bound(log: &PredictionLog, model_id: &str, alpha: &str, body: &ConditionBody) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let c = &ctx.counts;
    let detecting = error_detecting_from(c);
    let support = c.support().value();
    let errors = c.predicted - c.predicted_correct;
    let bound = Quantity::ratio(c.fired_wrong(), errors);

    let mut iv = Intermediates::default();
    iv.push("P(alpha in gt | alpha in f, body)", c.fired_precision().value());
    iv.push("P_alpha", c.precision().value());
    iv.push("support", support.clone());
    iv.push("P(body | alpha not in gt, alpha in f)", bound.clone());

    let outcome = match detecting {
        Verdict::Undefined => None,
        Verdict::No => Some(true),
        Verdict::Yes => support.compare(&bound).map(|o| o.is_le()),
    };
    if detecting != Verdict::Undefined {
        iv.push("error_detecting", flag(detecting == Verdict::Yes));
    }
    let mut report = ctx.report(
        TheoremId::SupportBound,
        iv,
        outcome,
        &[SkipReason::NoAlphaPredictions, SkipReason::ZeroSupport, SkipReason::NoErrors],
    );
    if detecting == Verdict::No {
        report.notes.push("not error detecting; holds vacuously".into());
    }
    report
}

/// `confidence > 1 - P` iff `P^c > P`.
pub fn check_residual(log: &PredictionLog, model_id: &str, alpha: &str, body: &ConditionBody) -> TheoremReport {
    let ctx = Context::new(log, model_id, alpha, None, body);
    let m = ctx.counts.bundle();
    let confidence = m.confidence.value();
    let (p, pc) = (m.precision.value(), m.rule_precision.value());
    let improves = confidence.compare(&m.residual).map(|o| o.is_gt());
    let gains = pc.compare(&p).map(|o| o.is_gt());

    let mut iv = Intermediates::default();
    iv.push("confidence", confidence);
    iv.push("residual", m.residual.clone());
    iv.push("P_alpha", p);
    iv.push("P_alpha^c", pc);
    iv.push("support", m.support.value());
    iv.push("K", m.k_factor.clone());
    let outcome = match (improves, gains) {
        (Some(a), Some(b)) => {
            iv.push("confidence > residual", flag(a));
            iv.push("P_alpha^c > P_alpha", flag(b));
            Some(a == b)
        }
        _ => None,
    };
    ctx.report(
        TheoremId::ResidualCondition,
        iv,
        outcome,
        &[SkipReason::NoAlphaPredictions, SkipReason::ZeroSupport, SkipReason::FullSupport],
    )
}

/// Every check for one `(model, alpha, body)`, plus the reclassification
/// limit when `beta` is given. Order is fixed.
pub fn verify_all(
    log: &PredictionLog,
    model_id: &str,
    alpha: &str,
    beta: Option<&str>,
    body: &ConditionBody,
) -> Vec<TheoremReport> {
    let mut out = vec![
        check_precision_change(log, model_id, alpha, body),
        check_conditional_precision(log, model_id, alpha, body),
        check_edns(log, model_id, alpha, body),
        check_recall_reduction(log, model_id, alpha, body),
    ];
    if let Some(beta) = beta {
        out.push(check_reclassification_limit(log, model_id, alpha, beta, body));
    }
    out.push(check_support_bound(log, model_id, alpha, body));
    out.push(check_residual(log, model_id, alpha, body));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub seed: u64,
    pub trials: u64,
    pub bounds: SizeBounds,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub holds: u64,
    pub violated: u64,
    pub skipped: u64,
    pub skip_reasons: BTreeMap<SkipReason, u64>,
}

impl Tally {
    pub fn total(&self) -> u64 {
        self.holds + self.violated + self.skipped
    }

    fn add(&mut self, report: &TheoremReport) {
        match report.verdict {
            TheoremVerdict::Holds => self.holds += 1,
            TheoremVerdict::Violated => self.violated += 1,
            TheoremVerdict::Skipped => {
                self.skipped += 1;
                if let Some(r) = report.skip_reason {
                    *self.skip_reasons.entry(r).or_default() += 1;
                }
            }
        }
    }
}

/// A violated check with everything needed to replay it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: u64,
    pub trial_seed: u64,
    pub report: TheoremReport,
    pub log_jsonl: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config: SweepConfig,
    pub tallies: BTreeMap<TheoremId, Tally>,
    /// Reclassification checks skipped for overlap whose implication failed.
    pub overlap_counterexamples: u64,
    pub violations: Vec<Violation>,
}

impl SweepTable {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tally(&self, id: TheoremId) -> &Tally {
        &self.tallies[&id]
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sweep serialization is infallible");
        s.push('\n');
        s
    }
}

/// One random trial: a log plus a `(alpha, beta, body)` drawn from its pools.
pub struct Trial {
    pub seed: u64,
    pub log: PredictionLog,
    pub alpha: String,
    pub beta: String,
    pub body: ConditionBody,
}

pub const SWEEP_MODEL: &str = "m";

pub fn trial_seed(master: u64, trial: u64) -> u64 {
    SplitMix64::new(master ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15)).next()
}

pub fn make_trial(seed: u64, bounds: &SizeBounds) -> Trial {
    let log = random_log(seed, bounds);
    let mut rng = DetRng::new(seed.rotate_left(17) ^ 0xD1B5_4A32_D192_ED03);
    let labels: Vec<String> = if log.label_universe().is_empty() {
        bounds.label_pool()
    } else {
        log.label_universe().iter().cloned().collect()
    };
    let alpha = labels[rng.below(labels.len() as u64) as usize].clone();
    let others: Vec<&String> = labels.iter().filter(|l| **l != alpha).collect();
    let beta = if others.is_empty() {
        alpha.clone()
    } else {
        others[rng.below(others.len() as u64) as usize].clone()
    };
    let conditions = bounds.condition_pool();
    let body = if conditions.is_empty() {
        ConditionBody::single("c0")
    } else {
        let mut picked: Vec<&String> = conditions.iter().filter(|_| rng.below(2) == 1).collect();
        if picked.is_empty() {
            picked.push(&conditions[rng.below(conditions.len() as u64) as usize]);
        }
        ConditionBody::new(picked.into_iter().cloned()).expect("nonempty body")
    };
    Trial {
        seed,
        log,
        alpha,
        beta,
        body,
    }
}

/// Runs every check on `trials` random logs. Deterministic for a fixed seed.
pub fn sweep(config: &SweepConfig) -> Result<SweepTable> {
    if config.trials == 0 {
        return Err(EdcrError::InvalidConfig("trial count must be at least 1".into()));
    }
    config.bounds.validate()?;
    let mut tallies: BTreeMap<TheoremId, Tally> =
        TheoremId::ALL.iter().map(|id| (*id, Tally::default())).collect();
    let mut violations = Vec::new();
    let mut overlap_counterexamples = 0;
    for t in 0..config.trials {
        let trial = make_trial(trial_seed(config.seed, t), &config.bounds);
        let reports = verify_all(&trial.log, SWEEP_MODEL, &trial.alpha, Some(&trial.beta), &trial.body);
        for report in reports {
            tallies.get_mut(&report.theorem_id).expect("known theorem").add(&report);
            if report.skip_reason == Some(SkipReason::OverlappingEvents)
                && report.value("implication_holds").is_some_and(|v| v.is_zero())
            {
                overlap_counterexamples += 1;
            }
            if report.verdict == TheoremVerdict::Violated {
                violations.push(Violation {
                    trial: t,
                    trial_seed: trial.seed,
                    report,
                    log_jsonl: trial.log.to_jsonl(),
                });
            }
        }
    }
    Ok(SweepTable {
        config: config.clone(),
        tallies,
        overlap_counterexamples,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::log::fixtures::log_a;
    use crate::log::PredictionRecord;

    fn q(n: i64, d: i64) -> Quantity {
        Quantity::from(Rational::new(n, d))
    }

    fn c1() -> ConditionBody {
        ConditionBody::single("c1")
    }

    #[test]
    fn precision_change_on_reference_log() {
        let r = check_precision_change(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("LHS"), Some(&q(1, 3)));
        assert_eq!(r.value("RHS"), Some(&q(1, 3)));
        assert_eq!(r.value("K"), Some(&q(2, 1)));
        assert_eq!(
            r.intermediates.names(),
            vec!["P_alpha", "P_alpha^c", "K", "support", "confidence", "residual", "LHS", "RHS"]
        );
    }

    #[test]
    fn precision_change_zero_and_full_support() {
        let r = check_precision_change(&log_a(), "m", "a", &ConditionBody::single("c_never"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("LHS"), Some(&q(0, 1)));
        assert_eq!(r.value("RHS"), Some(&q(0, 1)));

        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c1"]),
            PredictionRecord::new("2", "m", &["a"], &["b"], &["c1"]),
        ])
        .unwrap();
        let r = check_precision_change(&log, "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Skipped);
        assert_eq!(r.skip_reason, Some(SkipReason::FullSupport));
    }

    #[test]
    fn conditional_precision_rewrite() {
        let r = check_conditional_precision(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("RHS"), Some(&q(1, 1)));
    }

    #[test]
    fn edns_cases() {
        let r = check_edns(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("error_detecting"), Some(&q(1, 1)));

        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c_good"]),
            PredictionRecord::new("2", "m", &["a"], &["a"], &[]),
            PredictionRecord::new("3", "m", &["a"], &["b"], &[]),
        ])
        .unwrap();
        let r = check_edns(&log, "m", "a", &ConditionBody::single("c_good"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("error_detecting"), Some(&q(0, 1)));
        assert_eq!(r.value("P_alpha^c >= P_alpha"), Some(&q(0, 1)));
    }

    #[test]
    fn recall_reduction_cases() {
        let r = check_recall_reduction(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("LHS"), Some(&q(1, 3)));
        assert_eq!(r.value("RHS"), Some(&q(1, 3)));

        let r = check_recall_reduction(&log_a(), "m", "a", &ConditionBody::single("c_never"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("RHS"), Some(&q(0, 1)));

        let never_correct = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["b"], &["c1"]),
            PredictionRecord::new("2", "m", &["b"], &["a"], &[]),
        ])
        .unwrap();
        let r = check_recall_reduction(&never_correct, "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Skipped);
        assert_eq!(r.skip_reason, Some(SkipReason::ZeroPrecision));
    }

    /// toyota predictions under cond_us: dodge is right 1 time in 4 while
    /// dodge predictions are right 1 time in 2.
    fn weak_reclassification_log() -> PredictionLog {
        let mut r = Vec::new();
        for i in 0..4 {
            let gt = if i == 0 { "dodge" } else { "toyota" };
            r.push(PredictionRecord::new(format!("t{i}"), "car".into(), &["toyota"], &[gt], &["cond_us"]));
        }
        r.push(PredictionRecord::new("d0".to_string(), "car".into(), &["dodge"], &["dodge"], &[]));
        r.push(PredictionRecord::new("d1".to_string(), "car".into(), &["dodge"], &["ford"], &[]));
        PredictionLog::new(r).unwrap()
    }

    #[test]
    fn reclassification_limit_with_hypothesis() {
        let log = weak_reclassification_log();
        let r = check_reclassification_limit(&log, "car", "toyota", "dodge", &ConditionBody::single("cond_us"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("hypothesis"), Some(&q(1, 1)));
        assert_eq!(r.value("conclusion"), Some(&q(1, 1)));
        assert_eq!(r.value("P(beta in gt | alpha in f, body)"), Some(&q(1, 4)));
        assert_eq!(r.value("P(beta in gt | beta in f or (alpha in f, body))"), Some(&q(2, 6)));
    }

    #[test]
    fn reclassification_limit_vacuous() {
        let mut recs = weak_reclassification_log().into_records();
        for r in recs.iter_mut().take(4) {
            r.ground_truth = ["dodge".to_string()].into_iter().collect();
        }
        let log = PredictionLog::new(recs).unwrap();
        let r = check_reclassification_limit(&log, "car", "toyota", "dodge", &ConditionBody::single("cond_us"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("hypothesis"), Some(&q(0, 1)));
        assert!(r.notes.iter().any(|n| n.contains("hypothesis not met")));
    }

    #[test]
    fn reclassification_limit_overlap_is_skipped() {
        // The pair event re-covers the wrong dodge prediction and adds a new
        // correct record, so the union beats the base precision even though
        // the hypothesis holds.
        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["b"], &["b"], &[]),
            PredictionRecord::new("2", "m", &["b", "a"], &["x"], &["c"]),
            PredictionRecord::new("3", "m", &["a"], &["b"], &["c"]),
        ])
        .unwrap();
        let r = check_reclassification_limit(&log, "m", "a", "b", &ConditionBody::single("c"));
        assert_eq!(r.verdict, TheoremVerdict::Skipped);
        assert_eq!(r.skip_reason, Some(SkipReason::OverlappingEvents));
        assert_eq!(r.value("hypothesis"), Some(&q(1, 1)));
        assert_eq!(r.value("implication_holds"), Some(&q(0, 1)));
    }

    #[test]
    fn support_bound_cases() {
        let r = check_support_bound(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("support"), Some(&q(2, 3)));
        assert_eq!(r.value("P(body | alpha not in gt, alpha in f)"), Some(&q(1, 1)));

        let good = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c"]),
            PredictionRecord::new("2", "m", &["a"], &["b"], &[]),
        ])
        .unwrap();
        let r = check_support_bound(&good, "m", "a", &ConditionBody::single("c"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert!(!r.notes.is_empty());

        let always_right = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c"]),
            PredictionRecord::new("2", "m", &["a"], &["a"], &[]),
        ])
        .unwrap();
        let r = check_support_bound(&always_right, "m", "a", &ConditionBody::single("c"));
        assert_eq!(r.verdict, TheoremVerdict::Skipped);
        assert_eq!(r.skip_reason, Some(SkipReason::NoErrors));
    }

    #[test]
    fn residual_cases() {
        let r = check_residual(&log_a(), "m", "a", &c1());
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("confidence > residual"), Some(&q(1, 1)));

        // precision 1/2, confidence exactly 1/2 = residual
        let log = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &["c"]),
            PredictionRecord::new("2", "m", &["a"], &["b"], &["c"]),
            PredictionRecord::new("3", "m", &["a"], &["a"], &[]),
            PredictionRecord::new("4", "m", &["a"], &["b"], &[]),
        ])
        .unwrap();
        let r = check_residual(&log, "m", "a", &ConditionBody::single("c"));
        assert_eq!(r.verdict, TheoremVerdict::Holds);
        assert_eq!(r.value("P_alpha^c > P_alpha"), Some(&q(0, 1)));

        let r = check_residual(&log_a(), "m", "a", &ConditionBody::single("c_never"));
        assert_eq!(r.verdict, TheoremVerdict::Skipped);
        assert_eq!(r.skip_reason, Some(SkipReason::ZeroSupport));
    }

    #[test]
    fn sweep_rejects_zero_trials_and_is_deterministic() {
        let bounds = SizeBounds { max_records: 30, max_labels: 4, max_conditions: 3 };
        assert!(sweep(&SweepConfig { seed: 1, trials: 0, bounds: bounds.clone() }).is_err());
        let cfg = SweepConfig { seed: 1, trials: 200, bounds };
        let a = sweep(&cfg).unwrap();
        let b = sweep(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.passed());
        for id in TheoremId::ALL {
            assert_eq!(a.tally(id).total(), 200);
        }
    }

    #[test]
    fn report_json_round_trip_preserves_order() {
        let r = check_precision_change(&log_a(), "m", "a", &c1());
        let text = serde_json::to_string_pretty(&r).unwrap();
        let back: TheoremReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
        assert!(text.contains("\"LHS\": \"1/3\""));
        assert!(text.contains("\"theorem_id\": \"T1_PRECISION_CHANGE\""));
    }
}
