//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Dimensions of the operands do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument violates a precondition (empty input, duplicate id, ...).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numerical routine failed (non-convergence, non-finite values, ...).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// The input exceeds a hard size limit of the implementation.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A file does not conform to its binary format. `offset` is the byte
    /// offset of the field that failed to parse.
    #[error("format error at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn format(offset: u64, reason: impl Into<String>) -> Self {
        Error::Format {
            offset,
            reason: reason.into(),
        }
    }
}
