use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("visibility undefined for an all-zero profile")]
    UndefinedVisibility,

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("g2 normalization undefined: {0}")]
    UndefinedNormalization(String),

    #[error("insufficient statistics: {0}")]
    InsufficientStatistics(String),

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("ill-conditioned fit: parameter `{parameter}` is unconstrained by the data")]
    IllConditionedFit { parameter: &'static str },

    #[error("ill-conditioned reconstruction: {0}")]
    IllConditionedReconstruction(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    /// Malformed input text; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input is not sorted by time at line {line}; sort the stream before analysis")]
    SortRequired { line: usize },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    /// Config parsed but describes an invalid experiment.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Io,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } | Error::InvalidConfig(_) | Error::InvalidArgument(_) => ErrorClass::Config,
            Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
