use thiserror::Error;

/// Errors produced by the simulation and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state vector must have {expected} amplitudes, got {got}")]
    InvalidDimension { expected: usize, got: usize },

    #[error("state vector is not normalized (L2 norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("digit sequences have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },

    #[error("digit file holds {available} digits, {required} required")]
    InsufficientDigits { required: usize, available: usize },

    #[error("record {run} has no selection label")]
    MissingSelection { run: u64 },

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("no selection labels present in ensemble")]
    NoSelectionLabels,

    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },

    #[error("missing or malformed #meta header line")]
    MissingMeta,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
