use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A statistic that is not defined for the given input (for example the
    /// correlation of a constant series).
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("no 50-frame window satisfies the low-variation rule")]
    NoQualifyingWindow,

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("missing artifact: expected {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("subject {subject}, {}: {message}", file.display())]
    Corpus {
        subject: String,
        file: PathBuf,
        message: String,
    },

    #[error("{0}")]
    Config(String),

    /// Test-subject frames were read before the predict stage.
    #[error("leakage: {0}")]
    Leakage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-parsable category, printed by the CLI on failure.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Numeric(_) => "numeric",
            Error::Undefined(_) => "undefined",
            Error::NoQualifyingWindow => "no-window",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::MissingArtifact(_) => "missing-artifact",
            Error::Corpus { .. } => "corpus",
            Error::Config(_) => "config",
            Error::Leakage(_) => "leakage",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 2,
            Error::Io { .. } => 3,
            Error::MissingArtifact(_) => 4,
            Error::Format { .. } | Error::Corpus { .. } => 5,
            Error::Shape(_) => 6,
            Error::Leakage(_) => 8,
            Error::Numeric(_) | Error::Undefined(_) | Error::NoQualifyingWindow => 7,
        }
    }
}
