use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller violated an API contract (wrong dimensions, foreign tape, bad config).
    #[error("usage error: {0}")]
    Usage(String),

    /// Division by a jet or variable whose value is exactly zero.
    #[error("singularity: {0}")]
    Singularity(String),

    /// A function evaluated outside its domain (e.g. sqrt of a negative value).
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical procedure failed (non-convergence, non-finite values).
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Training produced a non-finite loss or gradient.
    #[error("non-finite value at iteration {iteration}: {detail}")]
    NonFinite { iteration: u64, detail: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
