use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A signal is not band-limited within the requested spectral depth and
    /// the caller did not opt into truncation.
    #[error("truncation refused: {0}")]
    TruncationRefused(String),

    #[error("signal evaluation failed: {0}")]
    EvaluationError(String),

    /// Rejection sampling of the free space made no progress.
    #[error("map infeasible: {0}")]
    MapInfeasible(String),

    /// A lemma check hit a zero eigengap or zero eigenvector overlap.
    #[error("degenerate case: {0}")]
    DegenerateCase(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
