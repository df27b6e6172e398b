use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (ranges, hyperparameters, names).
    #[error("configuration error: {0}")]
    Config(String),

    /// Inputs whose shapes or geometries do not agree.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Input that carries no usable signal (all-zero field, empty mask, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("phase offsets {offsets:?} give a rank-deficient encoding matrix")]
    RankDeficient { offsets: Vec<f64> },

    #[error("iterative solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("non-finite value in {stage} at iteration {iteration}")]
    NonFinite { stage: &'static str, iteration: usize },

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Errors raised while decoding the on-disk grid and model formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("truncated payload: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("payload holds {actual} elements but header declares {expected}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    VersionMismatch { found: u32, supported: u32 },
}

pub(crate) fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn shape_err(msg: impl Into<String>) -> Error {
    Error::Shape(msg.into())
}
