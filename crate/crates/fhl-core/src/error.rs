use thiserror::Error;

/// Errors shared by all operator and sampler modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("problem size {size} exceeds limit {limit}; subsample the measures first")]
    SizeOverflow { size: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
