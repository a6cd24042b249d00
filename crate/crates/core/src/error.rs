use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Pair generation produced nothing (e.g. every pair filtered out).
    #[error("degenerate dataset: {0}")]
    DegenerateDataset(String),

    /// A split left a required partition empty.
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    /// A forward pass or gradient produced a non-finite value.
    #[error("numeric overflow{}", match .epoch { Some(e) => format!(" at epoch {e}"), None => String::new() })]
    NumericOverflow { epoch: Option<u64> },

    /// Weight matrix is identically zero, so no distribution can be formed.
    #[error("degenerate weights: all entries are zero")]
    DegenerateWeights,

    /// Autocorrelation of a constant sequence is undefined after mean removal.
    #[error("constant sequence: zero variance")]
    ConstantSequence,

    /// Catch-all for degenerate numeric inputs (all-zero spectrum, coincident points).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
