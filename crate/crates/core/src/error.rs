use thiserror::Error;

/// Errors raised by the reconciliation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("alist parse error at line {line}: {kind}")]
    Alist { line: usize, kind: AlistError },

    #[error("malformed transcript: {0}")]
    Transcript(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The distinct ways an alist file can be rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlistError {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("expected {expected} integers, found {found}")]
    Count { expected: usize, found: usize },
    #[error("not an integer: {0:?}")]
    NotInteger(String),
    #[error("index {index} out of range 1..={max}")]
    OutOfRange { index: usize, max: usize },
    #[error("duplicate entry {0}")]
    Duplicate(usize),
    #[error("degree {degree} exceeds declared maximum {max}")]
    DegreeTooLarge { degree: usize, max: usize },
    #[error("adjacency inconsistency: {0}")]
    Inconsistent(String),
    #[error("unexpected end of input")]
    Truncated,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
