use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("wavelet decomposition of depth {levels} requires a length divisible by 2^{levels}, got {length}")]
    InvalidLevels { length: usize, levels: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("enumeration of {count} supports exceeds the limit of {limit}")]
    TooManySupports { count: u128, limit: u128 },

    #[error("recovery problem is infeasible: {0}")]
    Infeasible(String),

    #[error("relative error undefined: truth is zero but estimate is not")]
    ZeroTruth,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::LengthMismatch { expected, found })
    }
}
