use thiserror::Error;

/// Errors raised across the library. The CLI maps each variant to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("marking space has {size} compatible markings, above the limit of {limit}; use the flow value instead")]
    CombinatorialLimit { size: u128, limit: u128 },

    #[error("resource guard exceeded: {0}")]
    Guard(String),

    #[error("infeasible transport instance: {0}")]
    Infeasible(String),

    #[error("inconsistent flow: {0}")]
    Inconsistent(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("certificate failed: {0}")]
    Certificate(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
