use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("training diverged at epoch {epoch} (step {step}); last finite parameters retained")]
    Diverged {
        epoch: usize,
        step: usize,
        last_finite: Vec<f64>,
    },

    #[error("metric is singular or not positive definite at the queried point")]
    SingularMetric,

    #[error("dropout mask keeps no coordinates")]
    EmptyMask,

    #[error("could not draw a mask without an all-dropped layer after {0} attempts")]
    DegenerateMask(usize),

    #[error("embedding Jacobian is rank deficient (rank {rank} < {dim})")]
    DegenerateChart { rank: usize, dim: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("capacity exceeded: {what} is {actual}, limit {limit}")]
    Capacity {
        what: &'static str,
        actual: usize,
        limit: usize,
    },

    #[error("format error in {}: {msg}", path.display())]
    Format { path: PathBuf, msg: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("member {index}: {source}")]
    Member {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Shape(_) | Error::Unsupported(_) | Error::Capacity { .. } => 2,
            Error::Format { .. } | Error::Io(_) => 3,
            Error::Member { source, .. } => source.exit_code(),
            Error::Domain(_) => 2,
            _ => 4,
        }
    }
}
