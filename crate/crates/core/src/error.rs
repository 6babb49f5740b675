use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("parameter `{key}` is incompatible: shapes {left:?} vs {right:?}")]
    Incompatible {
        key: String,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("parameter key sets differ at `{key}`")]
    KeyMismatch { key: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error("nothing to aggregate")]
    EmptyAggregation,

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error("{file}: row {row}: {message}")]
    Parse {
        file: String,
        row: usize,
        message: String,
    },

    #[error("row counts differ: {left_name} has {left} rows, {right_name} has {right}")]
    Alignment {
        left_name: String,
        left: usize,
        right_name: String,
        right: usize,
    },

    #[error("{0}: dataset is empty")]
    EmptyDataset(String),

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    /// Errors that originate from reading or validating input data.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Alignment { .. } | Error::EmptyDataset(_) | Error::Io { .. }
        )
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
