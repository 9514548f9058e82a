//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("shape {shape:?} does not hold {len} values")]
    InvalidShape { shape: Vec<usize>, len: usize },

    #[error("backward requires a scalar loss, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },

    #[error("parameter `{name}` has no gradient; run backward first")]
    MissingGrad { name: String },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("epoch {epoch} out of schedule range [0, {total})")]
    EpochOutOfRange { epoch: usize, total: usize },

    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),

    #[error("beta parameters must be positive, got alpha={alpha}, beta={beta}")]
    InvalidBetaParams { alpha: f64, beta: f64 },

    #[error(
        "imbalance ratio {ratio} is infeasible for n_max={n_max}: class {class} would keep 0 examples"
    )]
    InfeasibleImbalance { ratio: f64, n_max: usize, class: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    Divergence { epoch: usize, step: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("reports evaluate different test sets: {left} vs {right}")]
    TestSetMismatch { left: String, right: String },

    #[error("{0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
