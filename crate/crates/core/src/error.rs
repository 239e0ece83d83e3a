use thiserror::Error;

/// Errors raised by the PML pipeline and its oracles.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PmlError {
    /// Malformed input: empty sample, bad profile, parameter out of range.
    #[error("invalid input: {0}")]
    Invalid(String),
    /// An enumeration guard was exceeded.
    #[error("size guard exceeded: {0}")]
    Guard(String),
    /// The feasible set is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// Mathematically undefined result (e.g. infinite divergence).
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = core::result::Result<T, PmlError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(PmlError::Invalid(msg.into()))
}

pub(crate) fn guard<T>(msg: impl Into<String>) -> Result<T> {
    Err(PmlError::Guard(msg.into()))
}
