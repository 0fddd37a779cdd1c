use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation and identification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown game `{0}` (expected `rps` or `battle_of_sexes`)")]
    UnknownGame(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("library cannot express the replicator right-hand side: {0}")]
    InsufficientLibrary(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("trajectory too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("trajectory {0} has no derivative matrix")]
    MissingDerivatives(usize),

    #[error("constraint block {block:?} violated at row {row}: sum = {sum}")]
    ConstraintViolation { block: Vec<usize>, row: usize, sum: f64 },

    #[error("models were built on different libraries")]
    LibraryMismatch,

    #[error("identified model diverged at t = {time}")]
    Diverged { time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{}:{line}: {message}", file.display())]
    Parse { file: PathBuf, line: u64, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for CLI use: 2 for I/O failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
