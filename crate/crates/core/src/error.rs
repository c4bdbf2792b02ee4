use thiserror::Error;

/// Errors raised by model construction and the fluctuation evaluators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid jump specification: {0}")]
    InvalidJumpSpec(String),

    #[error("rate must have positive real part (got {0})")]
    NonPositiveRate(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("argument outside the analyticity region: {0}")]
    OutsideDomain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root finding failed: {0}")]
    RootFinding(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
