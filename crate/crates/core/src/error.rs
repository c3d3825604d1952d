use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not stable: spectral radius {0}")]
    Unstable(f64),

    #[error("matrix has zero spectral radius and cannot be rescaled")]
    ZeroSpectralRadius,

    #[error("random draw was degenerate after {attempts} attempts: {reason}")]
    DegenerateDraw { attempts: usize, reason: String },

    #[error("matrix is not symmetric: {0}")]
    NotSymmetric(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite value encountered at iterate {iter}")]
    NonFinite { iter: usize },

    #[error("bisection failed: {0}")]
    Bracket(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
