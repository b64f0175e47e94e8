//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("regressor matrix is rank deficient: rank {rank} < {rows} rows")]
    RankDeficient { rank: usize, rows: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("invalid generation spec: {0}")]
    InvalidSpec(String),

    #[error("insufficient history: need {needed} leading samples, series has {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration cap exceeded: {0}")]
    CapExceeded(String),

    #[error("certificate requires an optimal point: {0}")]
    NotOptimal(String),

    #[error("solver failed to converge in {0}")]
    ConvergenceFailure(&'static str),

    #[error("dataset is not affine: last regressor row must be constant one")]
    NotAffine,

    #[error("projection column {0} is zero; coherence is undefined")]
    ZeroProjectionColumn(usize),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
