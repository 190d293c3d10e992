//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("simplex budget exceeded: at least {estimate} simplices, budget {budget}")]
    BudgetExceeded { estimate: usize, budget: usize },

    #[error("complex is not face-closed: missing facet of simplex {0}")]
    NotFaceClosed(usize),

    #[error("{count} censored point(s) present; the requested quantity is undefined under truncation")]
    CensoredPoints { count: usize },

    #[error("missing simplex pairing on diagram point")]
    MissingPairing,

    #[error("shape mismatch between representation values")]
    ShapeMismatch,

    #[error("oracle size bound exceeded: {0}")]
    OracleSizeBound(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
