use std::io;

use thiserror::Error;

/// Contract violations raised by tensor operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("invalid shape {0:?}")]
    InvalidShape(Vec<usize>),
    #[error("axis {axis} out of range for rank {rank}")]
    AxisOutOfRange { axis: usize, rank: usize },
    #[error("expected a one-element tensor, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("{op}: argument {value} outside the domain")]
    Domain { op: &'static str, value: f64 },
}

/// Snapshot attached to a training abort.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub step: u64,
    pub loss_d: f64,
    pub loss_g: f64,
    pub loss_ar: f64,
    pub scores: [f64; 4],
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("missing required config key `{0}`")]
    MissingKey(String),
    #[error(
        "non-finite value at step {}: loss_d={} loss_g={} loss_ar={} scores(sr1,sr2,sf1,sf2)={:?}",
        .0.step, .0.loss_d, .0.loss_g, .0.loss_ar, .0.scores
    )]
    NonFinite(Box<Diagnostic>),
    #[error("malformed file: {0}")]
    Format(String),
    #[error("incompatible checkpoint: {0}")]
    IncompatibleCheckpoint(String),
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("latent projection failed: {0}")]
    Projection(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::MissingKey(_) | Error::InvalidSpec(_) => 2,
            Error::NonFinite(_) => 3,
            Error::IncompatibleCheckpoint(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
