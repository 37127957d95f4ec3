use thiserror::Error;

use crate::model::expr::{EvalError, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("index {index} is past the end of an explicit list of length {len}")]
    IndexPastEnd { index: u64, len: usize },
    #[error("sequence index must be >= 1, got {0}")]
    IndexZero(u64),
    #[error("{0}")]
    Domain(String),
    #[error("invalid function spec: {0}")]
    InvalidSpec(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("running integral did not converge on [{a}, {b}]")]
    RunningIntegral { a: f64, b: f64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
