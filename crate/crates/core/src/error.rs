use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {0}")]
    BadVersion(u32),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error("timestamps not strictly increasing at {what} index {index}")]
    NonMonotonic { what: &'static str, index: usize },

    #[error("undefined phase at subcarrier {subcarrier}, rru {rru} (zero magnitude)")]
    UndefinedPhase { subcarrier: usize, rru: usize },

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op} in {scope}")]
    NonFinite { op: &'static str, scope: String },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
