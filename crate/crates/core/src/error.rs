use thiserror::Error;

use crate::types::PairId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("candidate pool is empty")]
    EmptyPool,

    #[error("budget must be at least 1")]
    ZeroBudget,

    #[error("budget {budget} exceeds pool size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("matrix is not positive definite after jitter repair (last jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("duplicate pair id {0}")]
    DuplicatePair(PairId),

    #[error("unknown pair id {0}")]
    UnknownPair(PairId),

    #[error("no golden reward available for pair {0}")]
    MissingOracle(PairId),

    #[error("annotator kind `{0}` cannot label pairs synchronously")]
    AsyncAnnotator(&'static str),

    #[error("posterior needs at least 2 samples, got {0}")]
    TooFewSamples(usize),

    #[error("prompt {prompt} has {count} responses, need at least 2")]
    InsufficientResponses { prompt: u32, count: usize },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown strategy `{0}`")]
    UnknownStrategy(String),

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn in_round(self, round: usize) -> Self {
        match self {
            Error::Round { .. } => self,
            other => Error::Round {
                round,
                source: Box::new(other),
            },
        }
    }
}

/// Failures while decoding dataset, checkpoint and artifact files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes {found:?}")]
    BadMagic { found: Vec<u8> },

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated records: needed {needed} bytes at byte offset {offset}, file has {available}")]
    Truncated {
        offset: u64,
        needed: u64,
        available: u64,
    },

    #[error("record {record}: embedding has dimension {actual}, expected {expected}")]
    DimMismatch {
        record: usize,
        expected: usize,
        actual: usize,
    },

    #[error("record {record}: {message}")]
    InvalidRecord { record: usize, message: String },

    #[error("line {line}: {message}")]
    Json { line: usize, message: String },

    #[error("{0}")]
    Other(String),
}
