use thiserror::Error;

use crate::transcript::TileIndex;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("field error: {0}")]
    Field(String),

    #[error("tiles out of canonical order: {next:?} after {previous:?}")]
    Order { previous: TileIndex, next: TileIndex },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}

pub(crate) fn parse(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}
