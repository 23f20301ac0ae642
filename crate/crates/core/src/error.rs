//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller passed inconsistent arguments (shape/dimension mismatch, bad range).
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A numeric precondition failed (non-finite input, tolerance breach).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A trajectory or rollout blew up; `step` is the first offending step.
    #[error("divergence at step {step}: {context}")]
    Divergence { step: usize, context: String },

    /// A data dimension has zero variance and cannot be normalized.
    #[error("degenerate data: dimension {dim} has zero variance")]
    DegenerateData { dim: usize },

    /// Euclidean-mode horizon loss hit a zero residual, where the norm is
    /// not differentiable. Squared mode is smooth everywhere.
    #[error("gradient singularity: zero residual in euclidean-mode loss (window {window}, step {step}); use squared mode")]
    GradientSingularity { window: usize, step: usize },

    /// The horizon-1 gradient norm vanished, so gradient ratios are undefined.
    #[error("degenerate minimum: gradient norm at horizon 1 is below {min_norm}")]
    DegenerateMinimum { min_norm: f64 },

    /// A parameter vector handed to a curvature probe is not stationary.
    #[error("non-stationary parameters for horizon {horizon}: gradient norm {grad_norm} exceeds {threshold}")]
    NonStationary {
        horizon: usize,
        grad_norm: f64,
        threshold: f64,
    },

    /// Paired-minima basin verification failed: re-training from the high-
    /// horizon minimum did not return to the low-horizon one.
    #[error("basin mismatch: verification run landed at relative distance {rel_dist} > {tolerance}")]
    BasinMismatch { rel_dist: f64, tolerance: f64 },

    /// Generalization-ratio denominator vanished (both minima reach the same
    /// loss, e.g. exact mechanistic models at the true parameters).
    #[error("indeterminate ratio: |denominator| {denom} below {min_denom}")]
    IndeterminateRatio { denom: f64, min_denom: f64 },

    /// An input file failed validation; `row` is 1-based (0 = header).
    #[error("ingestion error at row {row}: {message}")]
    Ingestion { row: usize, message: String },

    /// External-kind systems have no built-in vector field.
    #[error("system '{0}' has no built-in vector field; supply one")]
    NoVectorField(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
