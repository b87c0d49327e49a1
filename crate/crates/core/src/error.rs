use thiserror::Error;

#[derive(Debug, Error)]
pub enum HdcError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<HdcError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HdcError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        HdcError::InvalidArgument(msg.into())
    }

    /// Strips any `Sample` wrappers.
    pub fn root(&self) -> &HdcError {
        match self {
            HdcError::Sample { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, HdcError>;
