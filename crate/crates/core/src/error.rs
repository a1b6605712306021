use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the numerical core.
///
/// Variants are grouped by how callers react to them: [`Error::is_numerical`]
/// separates conditioning failures from input validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("pool of {size} formulations exceeds the cap of {cap}")]
    PoolTooLarge { size: u128, cap: usize },

    #[error("{what} = {value} is outside [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("pool has {available} candidates but {requested} were requested")]
    PoolExhausted { available: usize, requested: usize },

    #[error("kernel matrix of size {size} is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { size: usize, jitter: f64 },

    #[error("invalid scalarization weights: {0}")]
    InvalidWeights(String),

    #[error("campaign is {actual}, operation requires {expected}")]
    WrongStatus {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("formulations not in the pending batch: {0:?}")]
    UnknownFormulations(Vec<String>),

    #[error("formulations submitted more than once: {0:?}")]
    DuplicateResults(Vec<String>),

    #[error("pending formulations without results: {0:?}")]
    MissingResults(Vec<String>),

    #[error("viabilities outside [{min}, {max}]: {offenders:?}")]
    ViabilityOutOfRange {
        offenders: Vec<String>,
        min: f64,
        max: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

impl Error {
    /// True for failures caused by numerical conditioning rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NotPositiveDefinite { .. })
    }
}
