use thiserror::Error;

/// Errors produced by the solvers, the trainer and the file formats.
#[derive(Debug, Error)]
pub enum DibError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate encoder row (k={encoder}, x={symbol}): every exponent is -inf")]
    DegenerateRow { encoder: usize, symbol: usize },

    #[error("search space too large: {0} configurations (limit 1e7)")]
    SearchSpaceTooLarge(u128),

    #[error("solver failed: {0}")]
    Solver(String),

    #[error("training diverged: {0}")]
    Training(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("checksum mismatch for {path}: expected {expected}, found {found}")]
    Checksum {
        path: String,
        expected: String,
        found: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DibError>;

impl DibError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        DibError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: impl AsRef<std::path::Path>, reason: impl Into<String>) -> Self {
        DibError::Format {
            path: path.as_ref().display().to_string(),
            reason: reason.into(),
        }
    }
}
