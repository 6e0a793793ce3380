use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error in {context}: {detail}")]
    Shape { context: String, detail: String },

    #[error("index error: {0}")]
    Index(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("example cannot be represented: {0}")]
    Unrepresentable(String),

    #[error("checkpoint version {found} is incompatible (expected {expected})")]
    IncompatibleVersion { found: u32, expected: u32 },

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Shape {
            context: context.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Adds the name of a pipeline stage to a shape error.
    pub(crate) fn in_stage(self, stage: &str) -> Self {
        match self {
            Error::Shape { context, detail } => Error::Shape {
                context: format!("{stage}/{context}"),
                detail,
            },
            other => other,
        }
    }
}
