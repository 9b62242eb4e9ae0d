//! Prediction logs: per-sample model outputs, ground truth, and the
//! metacognitive conditions that held for the sample.
//!
//! A [`PredictionLog`] is immutable once built. On construction it indexes
//! every label, condition, and distribution tag into a [`RecordSet`] bitmap,
//! so counting an [`EventQuery`] is a handful of word-wise ANDs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::bitset::RecordSet;
use crate::error::{EdcrError, Result};

/// Tag used for records with no `distribution` field.
pub const DEFAULT_DISTRIBUTION: &str = "default";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub model_id: String,
    pub predicted: BTreeSet<String>,
    pub ground_truth: BTreeSet<String>,
    pub conditions: BTreeSet<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distribution: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    sample_id: String,
    model_id: String,
    predicted: Vec<String>,
    ground_truth: Vec<String>,
    conditions: Vec<String>,
    #[serde(default)]
    distribution: Option<String>,
}

fn to_set(field: &str, items: Vec<String>) -> std::result::Result<BTreeSet<String>, String> {
    let mut set = BTreeSet::new();
    for item in items {
        if item.is_empty() {
            return Err(format!("{field} contains an empty string"));
        }
        if !set.insert(item.clone()) {
            return Err(format!("{field} contains duplicate entry {item:?}"));
        }
    }
    Ok(set)
}

impl PredictionRecord {
    pub fn new<S: Into<String>>(
        sample_id: S,
        model_id: S,
        predicted: &[&str],
        ground_truth: &[&str],
        conditions: &[&str],
    ) -> Self {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        PredictionRecord {
            sample_id: sample_id.into(),
            model_id: model_id.into(),
            predicted: set(predicted),
            ground_truth: set(ground_truth),
            conditions: set(conditions),
            distribution: None,
        }
    }

    pub fn with_distribution(mut self, tag: impl Into<String>) -> Self {
        self.distribution = Some(tag.into());
        self
    }

    /// Distribution value, with untagged records mapped to `"default"`.
    pub fn distribution_tag(&self) -> &str {
        self.distribution.as_deref().unwrap_or(DEFAULT_DISTRIBUTION)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.sample_id.is_empty() {
            return Err("sample_id is empty".into());
        }
        if self.model_id.is_empty() {
            return Err("model_id is empty".into());
        }
        for (field, set) in [
            ("predicted", &self.predicted),
            ("ground_truth", &self.ground_truth),
            ("conditions", &self.conditions),
        ] {
            if set.iter().any(|s| s.is_empty()) {
                return Err(format!("{field} contains an empty string"));
            }
        }
        if matches!(&self.distribution, Some(d) if d.is_empty()) {
            return Err("distribution is empty".into());
        }
        Ok(())
    }

    fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        let record = PredictionRecord {
            sample_id: raw.sample_id,
            model_id: raw.model_id,
            predicted: to_set("predicted", raw.predicted)?,
            ground_truth: to_set("ground_truth", raw.ground_truth)?,
            conditions: to_set("conditions", raw.conditions)?,
            distribution: raw.distribution,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

#[derive(Clone, Debug, Default)]
struct LogIndex {
    predicted: HashMap<String, RecordSet>,
    truth: HashMap<String, RecordSet>,
    conditions: HashMap<String, RecordSet>,
    distributions: HashMap<String, RecordSet>,
    models: HashMap<String, RecordSet>,
}

fn index_into(map: &mut HashMap<String, RecordSet>, key: &str, n: usize, i: usize) {
    map.entry(key.to_string())
        .or_insert_with(|| RecordSet::empty(n))
        .insert(i);
}

#[derive(Clone, Debug)]
pub struct PredictionLog {
    records: Vec<PredictionRecord>,
    label_universe: BTreeSet<String>,
    condition_universe: BTreeSet<String>,
    distribution_universe: BTreeSet<String>,
    index: LogIndex,
}

impl PartialEq for PredictionLog {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Eq for PredictionLog {}

impl PredictionLog {
    /// Builds a validated log. Record order is preserved.
    pub fn new(records: Vec<PredictionRecord>) -> Result<Self> {
        let mut seen = HashMap::new();
        for (i, r) in records.iter().enumerate() {
            r.validate().map_err(|message| EdcrError::MalformedLine {
                line: i + 1,
                message,
            })?;
            if seen
                .insert((r.sample_id.as_str(), r.model_id.as_str()), i)
                .is_some()
            {
                return Err(EdcrError::DuplicateKey {
                    line: i + 1,
                    sample_id: r.sample_id.clone(),
                    model_id: r.model_id.clone(),
                });
            }
        }
        Ok(Self::build(records))
    }

    fn build(records: Vec<PredictionRecord>) -> Self {
        let n = records.len();
        let mut index = LogIndex::default();
        let mut labels = BTreeSet::new();
        let mut conditions = BTreeSet::new();
        let mut distributions = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            for l in &r.predicted {
                index_into(&mut index.predicted, l, n, i);
                labels.insert(l.clone());
            }
            for l in &r.ground_truth {
                index_into(&mut index.truth, l, n, i);
                labels.insert(l.clone());
            }
            for c in &r.conditions {
                index_into(&mut index.conditions, c, n, i);
                conditions.insert(c.clone());
            }
            let tag = r.distribution_tag();
            index_into(&mut index.distributions, tag, n, i);
            distributions.insert(tag.to_string());
            index_into(&mut index.models, &r.model_id, n, i);
        }
        PredictionLog {
            records,
            label_universe: labels,
            condition_universe: conditions,
            distribution_universe: distributions,
            index,
        }
    }

    pub fn empty() -> Self {
        Self::build(Vec::new())
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn label_universe(&self) -> &BTreeSet<String> {
        &self.label_universe
    }

    pub fn condition_universe(&self) -> &BTreeSet<String> {
        &self.condition_universe
    }

    pub fn distribution_universe(&self) -> &BTreeSet<String> {
        &self.distribution_universe
    }

    pub fn model_ids(&self) -> BTreeSet<String> {
        self.index.models.keys().cloned().collect()
    }

    pub fn into_records(self) -> Vec<PredictionRecord> {
        self.records
    }

    pub(crate) fn all(&self) -> RecordSet {
        RecordSet::full(self.len())
    }

    fn lookup(&self, map: &HashMap<String, RecordSet>, key: &str) -> RecordSet {
        map.get(key)
            .cloned()
            .unwrap_or_else(|| RecordSet::empty(self.len()))
    }

    pub(crate) fn predicted_set(&self, label: &str) -> RecordSet {
        self.lookup(&self.index.predicted, label)
    }

    pub(crate) fn truth_set(&self, label: &str) -> RecordSet {
        self.lookup(&self.index.truth, label)
    }

    pub(crate) fn condition_set(&self, condition: &str) -> RecordSet {
        self.lookup(&self.index.conditions, condition)
    }

    pub(crate) fn distribution_set(&self, tag: &str) -> RecordSet {
        self.lookup(&self.index.distributions, tag)
    }

    pub(crate) fn model_set(&self, model_id: &str) -> RecordSet {
        self.lookup(&self.index.models, model_id)
    }

    /// Records satisfying at least one of the given conditions.
    pub(crate) fn any_condition_set<'a>(&self, conditions: impl IntoIterator<Item = &'a String>) -> RecordSet {
        conditions
            .into_iter()
            .fold(RecordSet::empty(self.len()), |acc, c| match self.index.conditions.get(c) {
                Some(s) => acc.or(s),
                None => acc,
            })
    }

    /// Sub-log of one model, optionally restricted to one distribution tag.
    pub fn slice(&self, model_id: &str, distribution: Option<&str>) -> PredictionLog {
        let records = self
            .records
            .iter()
            .filter(|r| r.model_id == model_id)
            .filter(|r| distribution.is_none_or(|d| r.distribution_tag() == d))
            .cloned()
            .collect();
        Self::build(records)
    }

    pub fn count(&self, query: &EventQuery) -> u64 {
        self.matching(query).count()
    }

    pub(crate) fn matching(&self, query: &EventQuery) -> RecordSet {
        query
            .clauses
            .iter()
            .fold(RecordSet::empty(self.len()), |acc, clause| {
                acc.or(&self.clause_set(clause))
            })
    }

    fn clause_set(&self, clause: &[Literal]) -> RecordSet {
        let mut set = self.all();
        for lit in clause {
            set = match lit {
                Literal::Predicted(l) => set.and(&self.predicted_set(l)),
                Literal::NotPredicted(l) => set.and_not(&self.predicted_set(l)),
                Literal::InTruth(l) => set.and(&self.truth_set(l)),
                Literal::NotInTruth(l) => set.and_not(&self.truth_set(l)),
                Literal::Condition(c) => set.and(&self.condition_set(c)),
                Literal::NotCondition(c) => set.and_not(&self.condition_set(c)),
                Literal::Distribution(d) => set.and(&self.distribution_set(d)),
            };
        }
        set
    }

    /// Concatenation of two logs; fails on duplicate keys.
    pub fn concat(&self, other: &PredictionLog) -> Result<PredictionLog> {
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        PredictionLog::new(records)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_json_line());
            out.push('\n');
        }
        out
    }

    /// Records keyed by `(sample_id, model_id)`.
    pub fn keyed(&self) -> BTreeMap<(&str, &str), &PredictionRecord> {
        self.records
            .iter()
            .map(|r| ((r.sample_id.as_str(), r.model_id.as_str()), r))
            .collect()
    }
}

/// Parses a JSONL prediction log. Blank lines are skipped; line numbers in
/// errors are 1-based and count blank lines.
pub fn load_log(source: &str) -> Result<PredictionLog> {
    let mut records = Vec::new();
    let mut keys: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = PredictionRecord::parse_line(line)
            .map_err(|message| EdcrError::MalformedLine { line: line_no, message })?;
        let key = (record.sample_id.clone(), record.model_id.clone());
        if keys.insert(key, line_no).is_some() {
            return Err(EdcrError::DuplicateKey {
                line: line_no,
                sample_id: record.sample_id,
                model_id: record.model_id,
            });
        }
        records.push(record);
    }
    Ok(PredictionLog::build(records))
}

pub fn load_log_file(path: &std::path::Path) -> Result<PredictionLog> {
    load_log(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Predicted(String),
    NotPredicted(String),
    InTruth(String),
    NotInTruth(String),
    Condition(String),
    NotCondition(String),
    Distribution(String),
}

impl Literal {
    pub fn negate(&self) -> Option<Literal> {
        Some(match self {
            Literal::Predicted(l) => Literal::NotPredicted(l.clone()),
            Literal::NotPredicted(l) => Literal::Predicted(l.clone()),
            Literal::InTruth(l) => Literal::NotInTruth(l.clone()),
            Literal::NotInTruth(l) => Literal::InTruth(l.clone()),
            Literal::Condition(c) => Literal::NotCondition(c.clone()),
            Literal::NotCondition(c) => Literal::Condition(c.clone()),
            Literal::Distribution(_) => return None,
        })
    }

    pub fn holds(&self, r: &PredictionRecord) -> bool {
        match self {
            Literal::Predicted(l) => r.predicted.contains(l),
            Literal::NotPredicted(l) => !r.predicted.contains(l),
            Literal::InTruth(l) => r.ground_truth.contains(l),
            Literal::NotInTruth(l) => !r.ground_truth.contains(l),
            Literal::Condition(c) => r.conditions.contains(c),
            Literal::NotCondition(c) => !r.conditions.contains(c),
            Literal::Distribution(d) => r.distribution_tag() == d,
        }
    }
}

/// Event expression in disjunctive normal form: a disjunction of
/// conjunctions of [`Literal`]s.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventQuery {
    clauses: Vec<Vec<Literal>>,
}

impl Default for EventQuery {
    fn default() -> Self {
        Self::all()
    }
}

impl EventQuery {
    /// The query with zero atoms; matches every record.
    pub fn all() -> Self {
        EventQuery { clauses: vec![Vec::new()] }
    }

    /// The empty disjunction; matches no record.
    pub fn nothing() -> Self {
        EventQuery { clauses: Vec::new() }
    }

    pub fn conjunction(literals: impl IntoIterator<Item = Literal>) -> Self {
        EventQuery {
            clauses: vec![literals.into_iter().collect()],
        }
    }

    pub fn literal(lit: Literal) -> Self {
        Self::conjunction([lit])
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn and(mut self, lit: Literal) -> Self {
        for clause in &mut self.clauses {
            clause.push(lit.clone());
        }
        self
    }

    /// Conjunction of two DNF queries (clause cross product).
    pub fn and_query(&self, other: &EventQuery) -> EventQuery {
        let mut clauses = Vec::with_capacity(self.clauses.len() * other.clauses.len());
        for a in &self.clauses {
            for b in &other.clauses {
                let mut c = a.clone();
                c.extend(b.iter().cloned());
                clauses.push(c);
            }
        }
        EventQuery { clauses }
    }

    pub fn or(&self, other: &EventQuery) -> EventQuery {
        let mut clauses = self.clauses.clone();
        clauses.extend(other.clauses.iter().cloned());
        EventQuery { clauses }
    }

    /// Disjunction of the given condition ids.
    pub fn any_condition<'a>(conditions: impl IntoIterator<Item = &'a String>) -> Self {
        EventQuery {
            clauses: conditions
                .into_iter()
                .map(|c| vec![Literal::Condition(c.clone())])
                .collect(),
        }
    }

    /// Atom-wise negation; only defined for single-conjunction queries
    /// without distribution atoms.
    pub fn negate(&self) -> Option<EventQuery> {
        match self.clauses.as_slice() {
            [clause] => {
                let negated: Option<Vec<Literal>> = clause.iter().map(Literal::negate).collect();
                Some(EventQuery {
                    clauses: negated?.into_iter().map(|l| vec![l]).collect(),
                })
            }
            _ => None,
        }
    }

    /// Record-at-a-time evaluation, independent of the bitmap index.
    pub fn matches(&self, r: &PredictionRecord) -> bool {
        self.clauses
            .iter()
            .any(|clause| clause.iter().all(|lit| lit.holds(r)))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::log_a;
    use super::*;

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn loads_two_lines_and_builds_universes() {
        let src = r#"{"sample_id":"x","model_id":"m","predicted":["a"],"ground_truth":["b"],"conditions":["c"]}
{"sample_id":"y","model_id":"m","predicted":["d"],"ground_truth":[],"conditions":[],"distribution":"d1"}"#;
        let log = load_log(src).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(log.label_universe(), &["a", "b", "d"].iter().map(|x| s(x)).collect());
        assert_eq!(log.condition_universe(), &[s("c")].into_iter().collect());
        assert_eq!(
            log.distribution_universe(),
            &[s("d1"), s("default")].into_iter().collect()
        );
    }

    #[test]
    fn empty_input_gives_empty_log() {
        let log = load_log("").unwrap();
        assert!(log.is_empty());
        assert!(log.label_universe().is_empty());
        assert!(log.condition_universe().is_empty());
        assert!(log.distribution_universe().is_empty());
    }

    #[test]
    fn duplicate_key_cites_second_line() {
        let line = r#"{"sample_id":"x","model_id":"m","predicted":[],"ground_truth":[],"conditions":[]}"#;
        let err = load_log(&format!("{line}\n{line}\n")).unwrap_err();
        assert!(matches!(err, EdcrError::DuplicateKey { line: 2, .. }), "{err}");
    }

    #[test]
    fn strict_schema_rejections() {
        let unknown = r#"{"sample_id":"x","model_id":"m","predicted":[],"ground_truth":[],"conditions":[],"score":1}"#;
        assert!(matches!(load_log(unknown), Err(EdcrError::MalformedLine { line: 1, .. })));

        let dup = r#"{"sample_id":"x","model_id":"m","predicted":["a","a"],"ground_truth":[],"conditions":[]}"#;
        assert!(matches!(load_log(dup), Err(EdcrError::MalformedLine { line: 1, .. })));

        let empty_label = r#"{"sample_id":"x","model_id":"m","predicted":[""],"ground_truth":[],"conditions":[]}"#;
        assert!(load_log(empty_label).is_err());

        let good = r#"{"sample_id":"x","model_id":"m","predicted":[],"ground_truth":[],"conditions":[]}"#;
        let err = load_log(&format!("{good}\nnot json\n")).unwrap_err();
        assert!(matches!(err, EdcrError::MalformedLine { line: 2, .. }));

        let missing = r#"{"sample_id":"x","model_id":"m","predicted":[],"ground_truth":[]}"#;
        assert!(load_log(missing).is_err());
    }

    #[test]
    fn slice_by_model_and_distribution() {
        let log = log_a();
        assert_eq!(log.slice("m", None), log);
        assert!(log.slice("other", None).is_empty());

        let tagged = PredictionLog::new(vec![
            PredictionRecord::new("1", "m", &["a"], &["a"], &[]).with_distribution("d1"),
            PredictionRecord::new("2", "m", &["a"], &["a"], &[]).with_distribution("d2"),
            PredictionRecord::new("3", "m", &["a"], &["a"], &[]).with_distribution("d1"),
            PredictionRecord::new("4", "m", &["a"], &["a"], &[]),
        ])
        .unwrap();
        let d1 = tagged.slice("m", Some("d1"));
        assert_eq!(d1.len(), 2);
        assert!(d1.records().iter().all(|r| r.distribution.as_deref() == Some("d1")));
        let default = tagged.slice("m", Some(DEFAULT_DISTRIBUTION));
        assert_eq!(default.records()[0].sample_id, "4");
    }

    #[test]
    fn counts_on_reference_log() {
        let log = log_a();
        let a = s("a");
        assert_eq!(log.count(&EventQuery::literal(Literal::Predicted(a.clone()))), 3);
        assert_eq!(
            log.count(&EventQuery::conjunction([
                Literal::Predicted(a.clone()),
                Literal::InTruth(a.clone())
            ])),
            2
        );
        assert_eq!(log.count(&EventQuery::all()), 5);
        assert_eq!(log.count(&EventQuery::nothing()), 0);
    }

    #[test]
    fn jsonl_round_trip_is_bit_exact() {
        let log = log_a();
        let text = log.to_jsonl();
        let again = load_log(&text).unwrap();
        assert_eq!(again, log);
        assert_eq!(again.to_jsonl(), text);
        assert_eq!(
            text.lines().next().unwrap(),
            r#"{"sample_id":"r1","model_id":"m","predicted":["a"],"ground_truth":["a"],"conditions":[]}"#
        );
    }
}
