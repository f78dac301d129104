use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid parameters or an operation applied to the wrong kind of input.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// The design matrix does not have full row rank.
    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("data are not linearly separable: {0}")]
    NotSeparable(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A minimizer was not attained (e.g. the empirical landscape has an unbounded direction).
    #[error("unbounded direction: {0}")]
    Unbounded(String),

    /// The population landscape minimizer sits on the search boundary.
    #[error("noise model violates the positivity assumption: {0}")]
    AssumptionViolation(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
