use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input is not well-formed JSON (or JSONL/TSV/CSV syntax).
    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    /// Input parses but does not match the expected schema.
    #[error("schema error in {context}: {message}")]
    Schema { context: String, message: String },

    /// Input matches the schema but violates a data invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// A backend answered, but the answer does not fit the response contract.
    #[error("could not parse {backend} response: {message}; raw response: {raw:?}")]
    ResponseParse {
        backend: String,
        message: String,
        raw: String,
    },

    #[error("backend {backend} failed: {message}")]
    Backend { backend: String, message: String },

    #[error("offline mode: no cached response for {backend} request {key}")]
    OfflineCacheMiss { backend: String, key: String },

    #[error("missing {what} for fact {fact_id}")]
    MissingForFact { what: &'static str, fact_id: usize },

    /// Wraps an error with the pipeline location it came from.
    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any `Context` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}

/// Classifies a serde_json failure into a syntax or schema error.
pub(crate) fn from_json(context: impl Into<String>, err: serde_json::Error) -> Error {
    use serde_json::error::Category;
    let context = context.into();
    match err.classify() {
        Category::Data => Error::Schema {
            context,
            message: err.to_string(),
        },
        Category::Io => Error::Parse {
            context,
            message: err.to_string(),
        },
        Category::Syntax | Category::Eof => Error::Parse {
            context,
            message: err.to_string(),
        },
    }
}
