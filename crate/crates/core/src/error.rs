use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, KnetError>;

#[derive(Debug, Error)]
pub enum KnetError {
    /// Input data violates a structural requirement (non-finite entries, too few rows, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A quantity that must be strictly positive collapsed to zero (degree, bandwidth, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// The Cayley system `I + (tau/2) A` could not be solved; callers shrink `tau`.
    #[error("cayley step failed: {0}")]
    StepFailure(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("preprocessing failed: {0}")]
    Preprocessing(String),

    #[error("identity pretraining did not converge: relative residual {residual:.4} > {threshold}")]
    Pretraining { residual: f64, threshold: f64 },

    #[error("training diverged at outer iteration {iteration}: non-finite loss")]
    Divergence { iteration: usize },

    #[error("parse error at row {row}, column \"{column}\": {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl KnetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KnetError::Io {
            path: path.into(),
            source,
        }
    }
}
