use thiserror::Error;

/// Errors produced while building, parsing or solving a QAP instance.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QapError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("problem order must be at least 2, got {0}")]
    TooSmall(usize),

    #[error("matrix {matrix} is not symmetric at ({row}, {col})")]
    Asymmetric {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("instance too large for oracle: n = {n} exceeds {max}")]
    TooLargeForOracle { n: usize, max: usize },

    #[error("malformed instance: expected {expected} numbers, found {found}")]
    MalformedCount { expected: usize, found: usize },

    #[error("non-numeric token {token:?} at position {position}")]
    NonNumericToken { token: String, position: usize },

    #[error("invalid solver parameters: {0}")]
    InvalidParams(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl QapError {
    /// True for errors caused by unreadable or invalid instance data.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            QapError::MalformedCount { .. }
                | QapError::NonNumericToken { .. }
                | QapError::Asymmetric { .. }
                | QapError::TooSmall(_)
                | QapError::DimensionMismatch { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, QapError>;
