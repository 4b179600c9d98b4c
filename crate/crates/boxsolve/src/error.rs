use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoxError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("lower bound exceeds upper bound at index {index}")]
    InvertedBounds { index: usize },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("malformed solver state: {0}")]
    Parse(String),
}
