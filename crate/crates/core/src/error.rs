use thiserror::Error;

/// Errors raised by the samplers, field evaluators and numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// Exact integer reduction would leave the 128-bit range.
    #[error("capacity exceeded: {param} too large ({detail})")]
    Capacity { param: &'static str, detail: String },

    #[error("quadrature did not reach the requested accuracy (achieved error {achieved:e}, value {value:e})")]
    Accuracy { achieved: f64, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
