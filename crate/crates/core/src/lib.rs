//! Explaining execution-time differences with discriminants learned over
//! program traces.
//!
//! The pipeline: load traces ([`trace`]), cluster their mean times and
//! attach Gaussian-weighted labels ([`labeling`]), then learn either a
//! maximum-likelihood conjunctive discriminant ([`mlc`]) or a CART decision
//! tree ([`dtree`]). [`benchgen`] synthesizes micro-benchmark corpora and
//! [`evaluation`] runs group k-fold cross-validation.

pub mod benchgen;
pub mod dataset;
pub mod discriminant;
pub mod dtree;
pub mod error;
pub mod evaluation;
pub mod labeling;
pub mod mlc;
pub mod normal;
pub mod numeric;
pub mod seed;
pub mod trace;

pub use dataset::Dataset;
pub use discriminant::{ConjunctiveFormula, Discriminant, Formula, Observation, ThresholdTest};
pub use error::{Error, Result};
pub use labeling::{Clustering, KChoice, LabelFile};
pub use trace::{
    Corpus, LabelDistribution, PredicateMode, PredicateSet, TimingSummary, TraceRecord,
};
