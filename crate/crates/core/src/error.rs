use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimension must be positive")]
    EmptyMatrix,

    #[error("expected {expected} entries, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite entry at position {0}")]
    NonFinite(usize),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("subset mask must be nonempty")]
    EmptyMask,

    #[error("mask bits {bits:#x} out of range for dimension {n}")]
    MaskOutOfRange { bits: u64, n: usize },

    #[error("cannot parse subset {0:?}")]
    ParseMask(String),

    #[error("dimension {n} exceeds enumeration cap {cap}")]
    DimensionCap { n: usize, cap: usize },

    #[error("matrix is singular")]
    Singular,

    #[error("block F is numerically singular (|det F| = {det:e}, threshold {threshold:e})")]
    SingularBlock { det: f64, threshold: f64 },

    #[error("base matrix is not a P-matrix: minor {subset} = {value}")]
    NotPMatrix { subset: String, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no lambda in ({lambda_min:e}, {lambda_max:e}] gives a single violation; violation counts per step: {counts:?}")]
    ForgeFailed {
        lambda_min: f64,
        lambda_max: f64,
        counts: Vec<usize>,
    },

    #[error("strategy emitted an invalid batch: {0}")]
    InvalidBatch(String),

    #[error("value-mode queries need a matrix target")]
    ValueModeUnavailable,

    #[error("exact enumeration infeasible: {0}")]
    Infeasible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
