use thiserror::Error;

/// Errors raised by model construction and the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or inconsistent input (empty lists, nonpositive entries,
    /// too few Bernoulli trials, insufficient table coverage).
    #[error("validation error: {0}")]
    Validation(String),

    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested quantity cannot be resolved in double precision
    /// (underflow of a denominator, unresolved tail, non-convergence).
    #[error("numerical range failure: {0}")]
    NumericalRange(String),

    /// Exhaustive enumeration was requested for an instance that is too big.
    #[error("instance too large: {0}")]
    TooLarge(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn range(msg: impl Into<String>) -> Self {
        Error::NumericalRange(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
