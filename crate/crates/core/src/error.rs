use thiserror::Error;

pub type Result<T> = std::result::Result<T, FsmError>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FsmError {
    /// A pivot fell below `1e-14 * max|entry|` during elimination.
    #[error("singular section (size {size}): pivot {pivot:e} below threshold {threshold:e} at step {step}")]
    SingularSection {
        size: usize,
        step: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("model is not hermitian")]
    NotHermitian,

    #[error("model is not certified positive definite (lambda_minus = {lambda_minus:e})")]
    NotPositiveDefinite { lambda_minus: f64 },

    #[error("embedding fails at n = {n}: tail sum diverges")]
    EmbeddingFails { n: i64 },

    #[error("divergent sum: {0}")]
    Divergent(String),

    #[error("inverse check failed: max |B B^-1 - I| = {residual:e}")]
    InaccurateInverse { residual: f64 },

    #[error("overlapping blocks: cube {first} intersects cube {second}")]
    OverlappingBlocks { first: usize, second: usize },

    #[error("entrywise domination violated at ({row}, {col})")]
    NotDominated { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("reference solution unstable: |x_N - x_N/2| = {difference:e} exceeds {allowed:e}")]
    ReferenceUnstable { difference: f64, allowed: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl FsmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        FsmError::InvalidArgument(msg.into())
    }
}
