use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate trace id {id:?} on line {line}")]
    DuplicateId { id: String, line: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid trace {id:?}: {message}")]
    InvalidTrace { id: String, message: String },

    #[error("invalid label distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid clustering: {0}")]
    Clustering(String),

    #[error("invalid discriminant: {0}")]
    Discriminant(String),

    #[error("invalid benchmark spec: {0}")]
    BenchSpec(String),

    #[error("cross-validation: {0}")]
    Evaluation(String),

    #[error("learner failed on fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
