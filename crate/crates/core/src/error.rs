use thiserror::Error;

/// Errors raised by the comparison engines and the data model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("state spaces differ: {0}")]
    StateMismatch(String),
    #[error("horizon mismatch: expected {expected}, found {found}")]
    HorizonMismatch { expected: usize, found: usize },
    #[error("experiment has non-trivial controls; use the controlled engine")]
    Controlled,
    #[error("prior must have full support")]
    NotFullSupport,
    #[error("malformed linear system: {0}")]
    MalformedRow(String),
    #[error("certificate does not verify")]
    BadCertificate,
    #[error("size cap exceeded: {0}")]
    CapExceeded(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
