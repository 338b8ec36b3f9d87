use thiserror::Error;

use crate::gmdp::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(ValidationReport),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown input `{0}`")]
    UnknownInput(String),

    #[error("`{0}` is not a base initial state")]
    NotInitial(String),

    #[error("enumeration of {count} input sequences exceeds the bound {bound}")]
    EnumerationBound { count: u128, bound: u128 },

    #[error("distribution does not sum to one (sum = {sum})")]
    NotNormalized { sum: String },

    #[error("output dimensions differ: {left} vs {right}")]
    OutputDimensionMismatch { left: usize, right: usize },

    #[error("guarantee transfer needs gamma_delta <= lambda, got gamma_delta = {gamma} > lambda = {lambda}")]
    HypothesisViolation { gamma: String, lambda: String },

    #[error("abstract verdict is not opaque; nothing to transfer")]
    AbstractNotOpaque,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
