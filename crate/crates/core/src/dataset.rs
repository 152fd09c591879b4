//! A corpus joined with its labels, in the shape both learners consume.

use crate::discriminant::Observation;
use crate::error::Result;
use crate::labeling::LabelFile;
use crate::trace::{extract_predicates, Corpus, LabelDistribution, PredicateMode, PredicateSet};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trace_ids: Vec<String>,
    /// Observed methods, sorted; columns of `counts`.
    pub attribute_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    pub predicates: PredicateSet,
    pub labels: Vec<LabelDistribution>,
    pub num_labels: usize,
    /// Mean time of each label's cluster.
    pub centers_s: Vec<f64>,
}

impl Dataset {
    pub fn new(corpus: &Corpus, labels: &LabelFile, mode: &PredicateMode) -> Result<Self> {
        let attribute_names = corpus.observed_methods();
        Ok(Self {
            trace_ids: corpus.traces().iter().map(|t| t.id.clone()).collect(),
            counts: corpus.count_matrix(&attribute_names),
            attribute_names,
            predicates: extract_predicates(corpus, mode),
            labels: labels.distributions_for(corpus)?,
            num_labels: labels.k,
            centers_s: labels.centers_s.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.trace_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trace_ids.is_empty()
    }

    pub fn observation(&self, i: usize) -> Observation<'_> {
        Observation {
            predicates: self.predicates.values(i),
            counts: &self.counts[i],
        }
    }

    pub fn observations<'a>(
        &'a self,
        idx: &'a [usize],
    ) -> impl Iterator<Item = Observation<'a>> + Clone + 'a {
        idx.iter().map(|&i| self.observation(i))
    }

    pub fn label_refs(&self, idx: &[usize]) -> Vec<&LabelDistribution> {
        idx.iter().map(|&i| &self.labels[i]).collect()
    }
}
