use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("abscissas {first} and {second} are closer than {tolerance:e}")]
    DuplicateAbscissa {
        first: usize,
        second: usize,
        tolerance: f64,
    },
    #[error("system (G + mu I) is numerically singular even with ridge {ridge:e}")]
    SingularSystem { ridge: f64 },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("{n_taps} taps cannot be identified from {n_pilots} pilots")]
    IdentifiabilityViolation { n_taps: usize, n_pilots: usize },
    #[error("least-squares system is rank deficient (condition estimate {condition:e})")]
    RankDeficient { condition: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("parse error on line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
