use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A query handed to an oracle violates the oracle's input contract,
    /// e.g. values outside `[0, 1]` for a statistical query.
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// An estimator precondition on the distribution does not hold
    /// (for instance the second-moment bound `D[q^2] <= B^2`).
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("query has {query} values but the distribution has {support} support points")]
    QueryMismatch { query: usize, support: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
