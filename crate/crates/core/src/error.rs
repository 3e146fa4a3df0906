use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's precondition.
    #[error("parameter error: {0}")]
    Parameter(String),
    /// Input data is malformed (non-finite samples, nonzero mean where forbidden, ...).
    #[error("data error: {0}")]
    Data(String),
    /// A differential form has the wrong degree for the requested operation.
    #[error("degree error: {0}")]
    Degree(String),
    /// The right-hand side of a Hodge solve is not closed.
    #[error("form is not exact: |d omega| = {residual:e} exceeds tolerance {tolerance:e}")]
    NotExact { residual: f64, tolerance: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
