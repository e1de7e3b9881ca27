use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid pattern {0:?}")]
    InvalidPattern(String),

    #[error("level {level} exceeds the supported maximum {max}")]
    LevelTooLarge { level: usize, max: usize },

    #[error("forbidden set has level {found}, expected level {expected}")]
    LevelMismatch { expected: usize, found: usize },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("vector entry {index} is not strictly positive")]
    NonPositiveEntry { index: usize },

    #[error("internal consistency error: {0}")]
    Inconsistent(String),

    #[error("cache format error: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by size or memory limits rather than bad input.
    pub fn is_resource_limit(&self) -> bool {
        matches!(self, Error::ResourceLimit(_) | Error::LevelTooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
