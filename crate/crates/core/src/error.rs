use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigensolver did not converge: {converged}/{requested} pairs after {matvecs} operator applications")]
    NonConvergence {
        converged: usize,
        requested: usize,
        matvecs: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Stable machine-readable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyCloud => "empty_cloud",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Disconnected { .. } => "disconnected",
            Error::Degenerate(_) => "degenerate",
            Error::NonConvergence { .. } => "non_convergence",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Precondition(_) => "precondition",
        }
    }

    /// Process exit code: 2 bad input, 3 numerical failure, 4 precondition violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::EmptyCloud
            | Error::DimensionMismatch { .. }
            | Error::InvalidArgument(_) => 2,
            Error::Degenerate(_) | Error::NonConvergence { .. } => 3,
            Error::Disconnected { .. } | Error::Precondition(_) => 4,
        }
    }
}
