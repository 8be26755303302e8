use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cannot parse layer token `{0}`")]
    LayerToken(String),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("missing gradient for parameter #{0}")]
    MissingGradient(usize),

    #[error("non-finite {term} = {value} at step {step} (epoch {epoch})")]
    NonFinite {
        term: &'static str,
        value: f64,
        step: usize,
        epoch: usize,
    },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("checkpoint corrupted: {0}")]
    Corrupt(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    ///
    /// 1 usage/config, 2 runtime or numeric abort, 3 I/O or corruption.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::LayerToken(_) | Error::InvalidArgument(_) => 1,
            Error::Io { .. } | Error::Corrupt(_) | Error::Image { .. } => 3,
            Error::Shape(_)
            | Error::Graph(_)
            | Error::MissingGradient(_)
            | Error::NonFinite { .. }
            | Error::Dataset(_) => 2,
        }
    }
}
