use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FarmError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid layout: {0}")]
    InvalidLayout(String),
    #[error("invalid wind rose: {0}")]
    InvalidRose(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot place {n} turbines in the region after {draws} draws")]
    InfeasibleDensity { n: usize, draws: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] boxsolve::BoxError),
}

impl FarmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = FarmError> = std::result::Result<T, E>;
