use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("exponents out of admissible range: {0}")]
    OutOfRange(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),
    #[error("numerical abort: {0}")]
    NumericalAbort(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing constants: {0}")]
    MissingConstants(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
