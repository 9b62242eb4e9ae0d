//! Deterministic synthetic prediction logs.
//!
//! All sampling draws from ChaCha8 (`rand_chacha::ChaCha8Rng`, seeded with
//! `seed_from_u64`) through [`DetRng`], which only consumes raw `next_u64`
//! words. Bernoulli and categorical draws compare a 64-bit word against the
//! exact rational threshold, so the stream is stable across platforms and
//! `rand` versions. Per-trial seeds are derived with SplitMix64.
//!
//! Planting scheme: a planted condition for class `alpha` is only ever true on
//! records that predict `alpha`. On such a record it fires with probability
//! `s*q / (1 - P)` when the prediction is wrong and `s*(1 - q) / P` when it is
//! right, where `s` is the target support, `q` the target confidence, and `P`
//! the expected precision of `alpha` under the confusion model. This is one
//! valid family of condition/error dependence, calibrated in expectation.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{EdcrError, Result};
use crate::estimators::{metric_bundle_in, ConditionBody, Probability};
use crate::log::{PredictionLog, PredictionRecord, DEFAULT_DISTRIBUTION};
use crate::rational::{BigRational, Rational};

/// SplitMix64, used only to derive independent seeds from a master seed.
#[derive(Clone, Debug)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64(seed)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

/// Deterministic sampler over ChaCha8.
pub struct DetRng(ChaCha8Rng);

impl DetRng {
    pub fn new(seed: u64) -> Self {
        DetRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform integer in `[0, n)`, by rejection.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let limit = (1u128 << 64) / n as u128 * n as u128;
        loop {
            let x = self.next_u64() as u128;
            if x < limit {
                return (x % n as u128) as u64;
            }
        }
    }

    fn unit(&mut self) -> BigRational {
        BigRational::new(BigInt::from(self.next_u64()), BigInt::one() << 64)
    }

    /// True with probability `p` (to within 2^-64).
    pub fn bernoulli(&mut self, p: &Rational) -> bool {
        if p.0.is_zero() {
            return false;
        }
        if p.0 >= BigRational::one() {
            return true;
        }
        self.unit() < p.0
    }

    /// Index drawn with the given weights, which must sum to one.
    pub fn categorical(&mut self, weights: &[Rational]) -> usize {
        let u = self.unit();
        let mut acc = BigRational::zero();
        let mut last = 0;
        for (i, w) in weights.iter().enumerate() {
            if w.0.is_zero() {
                continue;
            }
            acc += &w.0;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SizeBounds {
    pub max_records: usize,
    pub max_labels: usize,
    pub max_conditions: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds {
            max_records: 30,
            max_labels: 4,
            max_conditions: 3,
        }
    }
}

impl SizeBounds {
    pub fn validate(&self) -> Result<()> {
        if self.max_records == 0 || self.max_labels == 0 {
            return Err(EdcrError::InvalidConfig(
                "size bounds need at least one record and one label".into(),
            ));
        }
        Ok(())
    }

    pub fn label_pool(&self) -> Vec<String> {
        (0..self.max_labels).map(|i| format!("l{i}")).collect()
    }

    pub fn condition_pool(&self) -> Vec<String> {
        (0..self.max_conditions).map(|i| format!("c{i}")).collect()
    }
}

/// Unstructured random log within `bounds`, model id `"m"`.
///
/// Each log draws its own size, label count, and event densities; a third of
/// logs are single-label so that distinct classes are often predicted on
/// disjoint records.
pub fn random_log(seed: u64, bounds: &SizeBounds) -> PredictionLog {
    let mut rng = DetRng::new(seed);
    let n = 1 + rng.below(bounds.max_records as u64) as usize;
    let n_labels = 1 + rng.below(bounds.max_labels as u64) as usize;
    let n_conditions = if bounds.max_conditions == 0 {
        0
    } else {
        1 + rng.below(bounds.max_conditions as u64) as usize
    };
    let densities = [Rational::new(1, 4), Rational::new(1, 2), Rational::new(3, 4)];
    let density = |rng: &mut DetRng| densities[rng.below(3) as usize].clone();
    let single_label = rng.below(3) == 0;
    let p_pred = density(&mut rng);
    let p_truth = density(&mut rng);
    let p_cond = density(&mut rng);
    let p_correct = density(&mut rng);

    let labels: Vec<String> = (0..n_labels).map(|i| format!("l{i}")).collect();
    let conditions: Vec<String> = (0..n_conditions).map(|i| format!("c{i}")).collect();
    let subset = |rng: &mut DetRng, pool: &[String], p: &Rational| -> BTreeSet<String> {
        pool.iter().filter(|_| rng.bernoulli(p)).cloned().collect()
    };

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let (predicted, ground_truth) = if single_label {
            let truth = labels[rng.below(n_labels as u64) as usize].clone();
            let predicted = if !rng.bernoulli(&p_pred) {
                BTreeSet::new()
            } else if rng.bernoulli(&p_correct) {
                [truth.clone()].into_iter().collect()
            } else {
                [labels[rng.below(n_labels as u64) as usize].clone()].into_iter().collect()
            };
            (predicted, [truth].into_iter().collect())
        } else {
            let predicted = subset(&mut rng, &labels, &p_pred);
            let ground_truth = subset(&mut rng, &labels, &p_truth);
            (predicted, ground_truth)
        };
        let conds = subset(&mut rng, &conditions, &p_cond);
        records.push(PredictionRecord {
            sample_id: format!("s{i}"),
            model_id: "m".into(),
            predicted,
            ground_truth,
            conditions: conds,
            distribution: None,
        });
    }
    PredictionLog::new(records).expect("random logs are valid by construction")
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionOutcome {
    pub predicted: Vec<String>,
    pub weight: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedCondition {
    pub condition_id: String,
    pub target_class: String,
    pub target_support: Rational,
    pub target_confidence: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub tag: String,
    pub record_fraction: Rational,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub confidence_override: BTreeMap<String, Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_records: u64,
    pub labels: Vec<String>,
    pub model_id: String,
    /// Ground-truth weight per label.
    pub class_priors: BTreeMap<String, Rational>,
    /// Per true label, a distribution over predicted label sets.
    pub confusion: BTreeMap<String, Vec<PredictionOutcome>>,
    #[serde(default)]
    pub planted_conditions: Vec<PlantedCondition>,
    #[serde(default)]
    pub distributions: Vec<DistributionSpec>,
}

fn invalid(msg: impl Into<String>) -> EdcrError {
    EdcrError::InvalidConfig(msg.into())
}

fn sums_to_one<'a>(what: &str, weights: impl IntoIterator<Item = &'a Rational>) -> Result<()> {
    let mut total = Rational::zero();
    for w in weights {
        if !w.is_probability() {
            return Err(invalid(format!("{what}: weight {w} outside [0, 1]")));
        }
        total = &total + w;
    }
    if total != Rational::one() {
        return Err(invalid(format!("{what}: weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Per-condition firing probabilities on wrong and right alpha predictions.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Calibration {
    on_error: Rational,
    on_correct: Rational,
}

impl SynthConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SynthConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialization is infallible");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(invalid("n_records must be at least 1"));
        }
        if self.model_id.is_empty() {
            return Err(invalid("model_id is empty"));
        }
        let labels: BTreeSet<&String> = self.labels.iter().collect();
        if labels.is_empty() || labels.len() != self.labels.len() || labels.iter().any(|l| l.is_empty()) {
            return Err(invalid("labels must be a nonempty list of distinct nonempty strings"));
        }
        if self.class_priors.keys().collect::<BTreeSet<_>>() != labels {
            return Err(invalid("class_priors must have exactly one entry per label"));
        }
        sums_to_one("class_priors", self.class_priors.values())?;
        for label in &self.labels {
            let row = self
                .confusion
                .get(label)
                .ok_or_else(|| invalid(format!("confusion has no row for label {label:?}")))?;
            sums_to_one(&format!("confusion[{label}]"), row.iter().map(|o| &o.weight))?;
            for o in row {
                let set: BTreeSet<&String> = o.predicted.iter().collect();
                if set.len() != o.predicted.len() || !set.is_subset(&labels) {
                    return Err(invalid(format!(
                        "confusion[{label}]: predicted sets must hold distinct known labels"
                    )));
                }
            }
        }
        if self.confusion.len() != self.labels.len() {
            return Err(invalid("confusion has rows for unknown labels"));
        }
        let mut ids = BTreeSet::new();
        for p in &self.planted_conditions {
            if p.condition_id.is_empty() || !ids.insert(p.condition_id.as_str()) {
                return Err(invalid("planted condition ids must be distinct and nonempty"));
            }
            if !labels.contains(&p.target_class) {
                return Err(invalid(format!("planted {:?}: unknown target class", p.condition_id)));
            }
            if !p.target_support.is_probability() || !p.target_confidence.is_probability() {
                return Err(invalid(format!("planted {:?}: targets outside [0, 1]", p.condition_id)));
            }
        }
        if !self.distributions.is_empty() {
            let tags: BTreeSet<&String> = self.distributions.iter().map(|d| &d.tag).collect();
            if tags.len() != self.distributions.len() || tags.iter().any(|t| t.is_empty()) {
                return Err(invalid("distribution tags must be distinct and nonempty"));
            }
            sums_to_one("record_fraction", self.distributions.iter().map(|d| &d.record_fraction))?;
            for d in &self.distributions {
                for (id, q) in &d.confidence_override {
                    if !ids.contains(id.as_str()) {
                        return Err(invalid(format!("distribution {:?}: override for unknown condition {id:?}", d.tag)));
                    }
                    if !q.is_probability() {
                        return Err(invalid(format!("distribution {:?}: override outside [0, 1]", d.tag)));
                    }
                }
            }
        }
        Ok(())
    }

    /// Probability that `label` is predicted, and that it is predicted correctly.
    fn label_rates(&self, label: &str) -> (Rational, Rational) {
        let mut predicted = Rational::zero();
        let mut correct = Rational::zero();
        for (truth, prior) in &self.class_priors {
            for o in &self.confusion[truth] {
                if o.predicted.iter().any(|l| l == label) {
                    let w = prior * &o.weight;
                    predicted = &predicted + &w;
                    if truth == label {
                        correct = &correct + &w;
                    }
                }
            }
        }
        (predicted, correct)
    }

    /// Expected precision of `label` under the priors and confusion.
    pub fn expected_precision(&self, label: &str) -> Option<Rational> {
        let (predicted, correct) = self.label_rates(label);
        (!predicted.is_zero()).then(|| Rational(&correct.0 / &predicted.0))
    }

    /// Expected precision pooled over every predicted label.
    pub fn expected_micro_precision(&self) -> Option<Rational> {
        let mut predicted = Rational::zero();
        let mut correct = Rational::zero();
        for label in &self.labels {
            let (p, c) = self.label_rates(label);
            predicted = &predicted + &p;
            correct = &correct + &c;
        }
        (!predicted.is_zero()).then(|| Rational(&correct.0 / &predicted.0))
    }

    fn calibrate(&self, planted: &PlantedCondition, confidence: &Rational) -> Result<Calibration> {
        let unsat = |reason: String| EdcrError::Unsatisfiable {
            condition: planted.condition_id.clone(),
            reason,
        };
        let s = &planted.target_support;
        let Some(precision) = self.expected_precision(&planted.target_class) else {
            return if s.is_zero() {
                Ok(Calibration { on_error: Rational::zero(), on_correct: Rational::zero() })
            } else {
                Err(unsat(format!("target class {:?} is never predicted", planted.target_class)))
            };
        };
        let error_rate = &Rational::one() - &precision;
        let fire_and_wrong = s * confidence;
        let fire_and_right = s * &(&Rational::one() - confidence);
        let rate = |mass: &Rational, base: &Rational, what: &str| -> Result<Rational> {
            if mass.is_zero() {
                return Ok(Rational::zero());
            }
            if base.is_zero() {
                return Err(unsat(format!("confusion yields no {what} predictions of {:?}", planted.target_class)));
            }
            let r = Rational(&mass.0 / &base.0);
            if !r.is_probability() {
                return Err(unsat(format!(
                    "needs firing rate {r} on {what} predictions (support {s}, confidence {confidence}, precision {precision})"
                )));
            }
            Ok(r)
        };
        Ok(Calibration {
            on_error: rate(&fire_and_wrong, &error_rate, "wrong")?,
            on_correct: rate(&fire_and_right, &precision, "correct")?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizedCondition {
    pub condition_id: String,
    pub target_class: String,
    /// `"*"` for the pooled log.
    pub distribution: String,
    pub precision: Probability,
    pub support: Probability,
    pub confidence: Probability,
}

/// Statistics measured on the emitted log, not on the sampler.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthBookkeeping {
    pub conditions: Vec<RealizedCondition>,
}

impl SynthBookkeeping {
    pub fn get(&self, condition_id: &str, distribution: &str) -> Option<&RealizedCondition> {
        self.conditions
            .iter()
            .find(|c| c.condition_id == condition_id && c.distribution == distribution)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bookkeeping serialization is infallible");
        s.push('\n');
        s
    }
}

pub const POOLED: &str = "*";

pub fn generate(cfg: &SynthConfig) -> Result<(PredictionLog, SynthBookkeeping)> {
    cfg.validate()?;

    // calibrations[d][k]: planted condition k under distribution d
    let dist_count = cfg.distributions.len().max(1);
    let mut calibrations = Vec::with_capacity(dist_count);
    for d in 0..dist_count {
        let mut row = Vec::new();
        for p in &cfg.planted_conditions {
            let q = cfg
                .distributions
                .get(d)
                .and_then(|spec| spec.confidence_override.get(&p.condition_id))
                .unwrap_or(&p.target_confidence);
            row.push(cfg.calibrate(p, q)?);
        }
        calibrations.push(row);
    }

    let priors: Vec<Rational> = cfg.labels.iter().map(|l| cfg.class_priors[l].clone()).collect();
    let fractions: Vec<Rational> = cfg.distributions.iter().map(|d| d.record_fraction.clone()).collect();
    let mut rng = DetRng::new(cfg.seed);
    let mut records = Vec::with_capacity(cfg.n_records as usize);
    for i in 0..cfg.n_records {
        let d = if fractions.is_empty() { 0 } else { rng.categorical(&fractions) };
        let truth = &cfg.labels[rng.categorical(&priors)];
        let row = &cfg.confusion[truth];
        let weights: Vec<Rational> = row.iter().map(|o| o.weight.clone()).collect();
        let predicted: BTreeSet<String> = row[rng.categorical(&weights)].predicted.iter().cloned().collect();
        let mut conditions = BTreeSet::new();
        for (k, p) in cfg.planted_conditions.iter().enumerate() {
            if !predicted.contains(&p.target_class) {
                continue;
            }
            let cal = &calibrations[d][k];
            let rate = if *truth == p.target_class { &cal.on_correct } else { &cal.on_error };
            if rng.bernoulli(rate) {
                conditions.insert(p.condition_id.clone());
            }
        }
        let distribution = cfg
            .distributions
            .get(d)
            .map(|spec| spec.tag.clone())
            .filter(|t| t != DEFAULT_DISTRIBUTION);
        records.push(PredictionRecord {
            sample_id: format!("s{i}"),
            model_id: cfg.model_id.clone(),
            predicted,
            ground_truth: [truth.clone()].into_iter().collect(),
            conditions,
            distribution,
        });
    }
    let log = PredictionLog::new(records)?;

    let mut bookkeeping = SynthBookkeeping::default();
    let mut tags: Vec<Option<&str>> = vec![None];
    tags.extend(cfg.distributions.iter().map(|d| Some(d.tag.as_str())));
    for p in &cfg.planted_conditions {
        let body = ConditionBody::single(p.condition_id.clone());
        for tag in &tags {
            let m = metric_bundle_in(&log, &cfg.model_id, &p.target_class, &body, *tag);
            bookkeeping.conditions.push(RealizedCondition {
                condition_id: p.condition_id.clone(),
                target_class: p.target_class.clone(),
                distribution: tag.unwrap_or(POOLED).to_string(),
                precision: m.precision,
                support: m.support,
                confidence: m.confidence,
            });
        }
    }
    Ok((log, bookkeeping))
}
