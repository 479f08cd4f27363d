use std::path::PathBuf;

/// Errors raised by the identification toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("cannot split segment `{segment}`: {message}")]
    Split { segment: String, message: String },
    #[error("ill-conditioned identification: {0}; retry with a ridge weight epsilon > 0")]
    IllConditioned(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error(
        "estimator not invertible: input map has rank {rank} < {required} columns; \
         identify with the full-column-rank constraint on B_bar"
    )]
    NotInvertible { rank: usize, required: usize },
    #[error("non-finite value at step {step} (unstable model?)")]
    Overflow { step: usize },
    #[error("discretization error: {0}")]
    Discretization(String),
    #[error("invalid network definition, key `{key}`: {message}")]
    Network { key: String, message: String },
    #[error("invalid model file, key `{key}`: {message}")]
    ModelFile { key: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("toml error in {path}: {message}")]
    Toml { path: PathBuf, message: String },
}

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::IllConditioned(_)
            | Error::NotInvertible { .. }
            | Error::Overflow { .. }
            | Error::Discretization(_) => ErrorKind::Numerical,
            Error::Network { .. } | Error::Constraint(_) | Error::Toml { .. } => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
