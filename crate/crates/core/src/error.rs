use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NdbalError {
    #[error("atom payload incompatible with structure space: {0}")]
    IncompatibleAtom(String),

    #[error("empty posterior: every log-weight is -inf")]
    EmptyPosterior,

    #[error("version space empty: no structure is consistent with the response")]
    VersionSpaceEmpty,

    #[error("degenerate posterior: average diameter is zero")]
    DegeneratePosterior,

    #[error("select timed out after {rounds} rounds (best candidate index {best_index})")]
    SelectTimeout { best_index: usize, rounds: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl NdbalError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        NdbalError::InvalidParameter(msg.into())
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        NdbalError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for NdbalError {
    fn from(e: std::io::Error) -> Self {
        NdbalError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, NdbalError>;
