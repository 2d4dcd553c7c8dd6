use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("SNR is undefined for an all-zero channel")]
    UndefinedSnr,

    #[error("NMSE is undefined for a zero-energy reference")]
    ZeroReference,

    #[error("support of size {support} exceeds the {rows} available measurements")]
    Underdetermined { support: usize, rows: usize },

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("support columns of the bridge operator are rank deficient (rank {rank} < {support})")]
    NoBridge { rank: usize, support: usize },

    #[error("configuration error at line {line}: {key}: {message}")]
    Config { line: usize, key: String, message: String },

    #[error("configuration invariant violated ({keys}): {message}")]
    ConfigInvariant { keys: String, message: String },
}
