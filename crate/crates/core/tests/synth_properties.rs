mod common;

use common::fixture;
use edcr::error::EdcrError;
use edcr::estimators::{invariance_profile, metric_bundle, ConditionBody, Verdict};
use edcr::log::load_log;
use edcr::rational::{Quantity, Rational};
use edcr::synth::{generate, random_log, SizeBounds, SynthConfig, POOLED};
use proptest::prelude::*;

fn close(q: &Quantity, target: Rational, tol: Rational) -> bool {
    let diff = q.abs_diff(&Quantity::from(target));
    diff.value().is_some_and(|d| *d <= tol)
}

#[test]
fn planted_targets_are_met_within_tolerance() {
    let cfg = SynthConfig::from_json(&fixture("planted_signal.json")).unwrap();
    let (log, book) = generate(&cfg).unwrap();
    assert_eq!(log.len(), 10_000);
    let realized = book.get("c_sig", POOLED).unwrap();
    let tol = Rational::new(1, 20);
    assert!(close(&realized.support.value(), Rational::new(1, 2), tol.clone()));
    assert!(close(&realized.confidence.value(), Rational::new(9, 10), tol));

    // bookkeeping is measured on the emitted log
    let m = metric_bundle(&log, "m", "a", &ConditionBody::single("c_sig"));
    assert_eq!(m.support, realized.support);
    assert_eq!(m.confidence, realized.confidence);
}

#[test]
fn planted_targets_beyond_the_error_mass_are_rejected() {
    // class precision 4/5 leaves 1/5 errors, but support 1/2 at
    // confidence 9/10 needs 9/20 of the predictions to be errors
    let mut cfg = SynthConfig::from_json(&fixture("planted_signal.json")).unwrap();
    cfg.class_priors = [("a", "4/5"), ("b", "1/5"), ("c", "0/1")]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.parse().unwrap()))
        .collect();
    cfg.confusion.get_mut("b").unwrap()[0].weight = Rational::one();
    cfg.confusion.get_mut("b").unwrap()[1].weight = Rational::zero();
    cfg.planted_conditions.truncate(1);
    assert_eq!(cfg.expected_precision("a"), Some(Rational::new(4, 5)));
    let err = generate(&cfg).unwrap_err();
    assert!(matches!(&err, EdcrError::Unsatisfiable { condition, .. } if condition == "c_sig"), "{err}");
}

#[test]
fn witness_is_not_invariant() {
    let cfg = SynthConfig::from_json(&fixture("invariance_witness.json")).unwrap();
    let (log, book) = generate(&cfg).unwrap();
    let profile = invariance_profile(&log, "m", "a", &ConditionBody::single("c_sig"));
    let verdicts: Vec<(&str, Verdict)> = profile.rows.iter().map(|r| (r.distribution.as_str(), r.verdict)).collect();
    assert_eq!(verdicts, [("d1", Verdict::Yes), ("d2", Verdict::No)]);
    assert!(!profile.invariant);
    // under d2 the condition only marks correct predictions
    assert_eq!(book.get("c_sig", "d2").unwrap().confidence.value(), Quantity::from(Rational::zero()));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn random_logs_validate_and_stay_in_bounds(
        seed in any::<u64>(),
        records in 1usize..40,
        labels in 1usize..5,
        conditions in 0usize..4,
    ) {
        let bounds = SizeBounds { max_records: records, max_labels: labels, max_conditions: conditions };
        let log = random_log(seed, &bounds);
        prop_assert!(log.len() >= 1 && log.len() <= records);
        prop_assert!(log.label_universe().len() <= labels);
        prop_assert!(log.condition_universe().len() <= conditions);
        prop_assert_eq!(load_log(&log.to_jsonl()).unwrap(), log.clone());
        prop_assert_eq!(random_log(seed, &bounds).to_jsonl(), log.to_jsonl());
    }

    #[test]
    fn generated_logs_validate(seed in any::<u64>(), n in 1u64..300) {
        let mut cfg = SynthConfig::from_json(&fixture("invariance_witness.json")).unwrap();
        cfg.seed = seed;
        cfg.n_records = n;
        let (log, _) = generate(&cfg).unwrap();
        prop_assert_eq!(log.len() as u64, n);
        prop_assert_eq!(load_log(&log.to_jsonl()).unwrap(), log);
    }
}
