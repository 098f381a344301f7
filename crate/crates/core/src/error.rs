use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid p-value {value} at position {index}: must be finite and in [0, 1]")]
    InvalidPValue { index: usize, value: f64 },

    #[error("hypothesis ids must be a permutation of 0..{m}")]
    InvalidIds { m: usize },

    #[error("truth labels have length {found}, expected {expected}")]
    TruthLength { expected: usize, found: usize },

    #[error("length mismatch: {expected} p-values but {found} critical constants")]
    LengthMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("m = {m} exceeds the limit of {max} for this routine")]
    SizeGuard { m: usize, max: usize },

    #[error("quadrature did not reach tolerance {tolerance:e} on [{lower}, {upper}]")]
    ToleranceFailure {
        tolerance: f64,
        lower: f64,
        upper: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
