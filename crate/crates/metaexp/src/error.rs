//! Crate-wide error type.

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or invariant-violating input data. `row` is 1-based and
    /// counts data rows (the CSV header is row 0).
    #[error("schema error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Schema { row: Option<usize>, message: String },

    #[error("unknown listing id `{0}`")]
    UnknownListing(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty training corpus")]
    EmptyCorpus,

    #[error("no users remain after applying population filters")]
    EmptyPopulation,

    #[error("cluster `{0}` has no eligible listings")]
    EmptyCluster(String),

    #[error("empty group: {0}")]
    EmptyGroup(String),

    #[error("too few clusters: need at least {needed}, got {got}")]
    TooFewClusters { needed: usize, got: usize },

    #[error("design matrix is rank deficient (column `{0}`)")]
    RankDeficient(String),

    #[error("too few clusters for clustered covariance: need at least 2, got {0}")]
    TooFewSeClusters(usize),

    #[error("bias share denominator |beta + nu| is numerically zero")]
    DegenerateDenominator,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty sample in statistical test")]
    EmptySample,

    #[error("listing `{0}` is missing the required elasticity index")]
    MissingIndex(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn schema(row: impl Into<Option<usize>>, message: impl Into<String>) -> Self {
        Error::Schema { row: row.into(), message: message.into() }
    }
}
