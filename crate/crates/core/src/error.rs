use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, NsumError>;

#[derive(Debug, Error)]
pub enum NsumError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("respondent {node} reports zero in-degree")]
    ZeroDegreeRespondent { node: u32 },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("enumeration too large: {states} states exceeds cap {cap}")]
    TooLarge { states: u128, cap: u128 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("target not reachable; largest sample size tried was {largest_tried}")]
    NotFound { largest_tried: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl NsumError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        NsumError::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad input data rather than bad usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, NsumError::InvalidArgument(_))
    }
}
