use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, KrrError>;

#[derive(Debug, Error)]
pub enum KrrError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation was called on inputs that its contract excludes, e.g.
    /// nearest-center prediction over a random partitioning.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("partition {id}: {source}")]
    Partition {
        id: usize,
        #[source]
        source: Box<KrrError>,
    },

    #[error("partition {id} panicked: {message}")]
    TaskPanicked { id: usize, message: String },
}

impl KrrError {
    pub fn in_partition(self, id: usize) -> Self {
        KrrError::Partition {
            id,
            source: Box::new(self),
        }
    }

    /// True when this error, possibly wrapped in a partition tag, is a
    /// failed factorization.
    pub fn is_not_positive_definite(&self) -> bool {
        match self {
            KrrError::NotPositiveDefinite { .. } => true,
            KrrError::Partition { source, .. } => source.is_not_positive_definite(),
            _ => false,
        }
    }
}
