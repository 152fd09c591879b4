//! Trace records, timing summaries, predicate valuations and label
//! distributions, plus the newline-delimited JSON corpus format.
//!
//! A corpus file holds one JSON object per line:
//!
//! ```text
//! {"id":"t1","counts":{"f":2,"g":0},"timings_s":[1.0,1.2]}
//! ```
//!
//! Exactly the keys `id`, `counts` and `timings_s` are accepted. Methods
//! missing from `counts` are treated as never called.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`LabelDistribution`].
pub const DISTRIBUTION_TOLERANCE: f64 = 1e-9;

/// One execution trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub id: String,
    pub counts: BTreeMap<String, u64>,
    pub timings_s: Vec<f64>,
}

impl TraceRecord {
    pub fn new(
        id: impl Into<String>,
        counts: impl IntoIterator<Item = (String, u64)>,
        timings_s: Vec<f64>,
    ) -> Result<Self> {
        let record = Self {
            id: id.into(),
            counts: counts.into_iter().collect(),
            timings_s,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |message: &str| Error::InvalidTrace {
            id: self.id.clone(),
            message: message.to_owned(),
        };
        if self.id.is_empty() {
            return Err(invalid("empty trace id"));
        }
        if self.timings_s.is_empty() {
            return Err(invalid("no timing measurements"));
        }
        if self.timings_s.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(invalid("timings must be finite and positive"));
        }
        Ok(())
    }

    /// Call count of `method`, zero when absent.
    pub fn count(&self, method: &str) -> u64 {
        self.counts.get(method).copied().unwrap_or(0)
    }

    pub fn summary(&self) -> TimingSummary {
        summarize_timing(self)
    }
}

/// Mean and standard deviation of a trace's repeated measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub mean_s: f64,
    pub std_s: f64,
}

/// Sample mean and population standard deviation (divisor M).
pub fn summarize_timing(trace: &TraceRecord) -> TimingSummary {
    let m = trace.timings_s.len() as f64;
    let mean_s = trace.timings_s.iter().sum::<f64>() / m;
    let var = trace
        .timings_s
        .iter()
        .map(|t| (t - mean_s).powi(2))
        .sum::<f64>()
        / m;
    TimingSummary {
        mean_s,
        std_s: var.sqrt(),
    }
}

/// A discrete distribution over the K timing labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelDistribution {
    probs: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("no labels".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} outside [0, 1]"
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { probs })
    }

    /// All mass on `label`.
    pub fn point(label: usize, k: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[label] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_labels(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, label: usize) -> f64 {
        self.probs[label]
    }

    /// Most probable label, ties broken toward the lower index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        self.probs[self.argmax()]
    }
}

impl TryFrom<Vec<f64>> for LabelDistribution {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<LabelDistribution> for Vec<f64> {
    fn from(d: LabelDistribution) -> Self {
        d.probs
    }
}

/// A validated set of traces with their timing summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    traces: Vec<TraceRecord>,
    summaries: Vec<TimingSummary>,
}

impl Corpus {
    pub fn new(traces: Vec<TraceRecord>) -> Result<Self> {
        if traces.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut seen = HashSet::with_capacity(traces.len());
        for (i, t) in traces.iter().enumerate() {
            t.validate()?;
            if !seen.insert(t.id.as_str()) {
                return Err(Error::DuplicateId {
                    id: t.id.clone(),
                    line: i + 1,
                });
            }
        }
        let summaries = traces.iter().map(summarize_timing).collect();
        Ok(Self { traces, summaries })
    }

    pub fn traces(&self) -> &[TraceRecord] {
        &self.traces
    }

    pub fn summaries(&self) -> &[TimingSummary] {
        &self.summaries
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn mean_times(&self) -> Vec<f64> {
        self.summaries.iter().map(|s| s.mean_s).collect()
    }

    /// Every method observed with a nonzero count, sorted by name.
    pub fn observed_methods(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .traces
            .iter()
            .flat_map(|t| t.counts.iter())
            .filter(|(_, c)| **c > 0)
            .map(|(m, _)| m.as_str())
            .collect();
        set.into_iter().map(str::to_owned).collect()
    }

    /// Per-trace call counts over `methods`, in that column order.
    pub fn count_matrix(&self, methods: &[String]) -> Vec<Vec<u64>> {
        self.traces
            .iter()
            .map(|t| methods.iter().map(|m| t.count(m)).collect())
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.traces {
            out.push_str(&serde_json::to_string(t)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let text = self.to_jsonl()?;
        let mut file = fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        file.write_all(text.as_bytes()).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })
    }
}

/// Parses a corpus from newline-delimited JSON. Blank lines are skipped.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut traces = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if !seen.insert(record.id.clone()) {
            return Err(Error::DuplicateId {
                id: record.id,
                line: line_no,
            });
        }
        traces.push(record);
    }
    Corpus::new(traces)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_corpus(&text)
}

/// How atomic predicates are derived from call counts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum PredicateMode {
    /// One predicate per method: "was called at least once".
    #[default]
    CalledOnce,
    /// One predicate per (method, c): "was called at least c times".
    CountThresholds(Vec<u64>),
}

/// Corpus-wide predicate names and per-trace truth valuations.
#[derive(Debug, Clone, PartialEq)]
pub struct PredicateSet {
    names: Vec<String>,
    values: Vec<Vec<bool>>,
}

impl PredicateSet {
    pub fn from_parts(names: Vec<String>, values: Vec<Vec<bool>>) -> Self {
        debug_assert!(values.iter().all(|v| v.len() == names.len()));
        Self { names, values }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Valuation of trace `i`.
    pub fn values(&self, i: usize) -> &[bool] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.values
    }

    pub fn num_predicates(&self) -> usize {
        self.names.len()
    }
}

pub fn extract_predicates(corpus: &Corpus, mode: &PredicateMode) -> PredicateSet {
    let methods = corpus.observed_methods();
    let thresholds: Vec<u64> = match mode {
        PredicateMode::CalledOnce => vec![1],
        PredicateMode::CountThresholds(list) => {
            let set: BTreeSet<u64> = list.iter().copied().map(|c| c.max(1)).collect();
            set.into_iter().collect()
        }
    };
    let mut names = Vec::with_capacity(methods.len() * thresholds.len());
    let mut columns: Vec<(&str, u64)> = Vec::with_capacity(names.capacity());
    for m in &methods {
        for &c in &thresholds {
            names.push(match mode {
                PredicateMode::CalledOnce => m.clone(),
                PredicateMode::CountThresholds(_) => format!("{m}>={c}"),
            });
            columns.push((m.as_str(), c));
        }
    }
    let values = corpus
        .traces()
        .iter()
        .map(|t| columns.iter().map(|(m, c)| t.count(m) >= *c).collect())
        .collect();
    PredicateSet { names, values }
}
