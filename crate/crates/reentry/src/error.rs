use std::path::{Path, PathBuf};

use reentry_core::eval::EvalError;
use reentry_core::hypersearch::SearchError;
use reentry_core::nn::NnError;
use reentry_core::train::TrainError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Unreadable or inconsistent input data.
    #[error("{0}")]
    Input(String),
    /// Training or fitting produced non-finite values.
    #[error("{0}")]
    Numerical(String),
    /// Invalid flags, config keys or hyperparameters.
    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn input(msg: impl std::fmt::Display) -> Self {
        Error::Input(msg.to_string())
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Input(_) => 2,
            Error::Numerical(_) => 3,
            Error::Config(_) => 4,
        }
    }
}

impl From<NnError> for Error {
    fn from(e: NnError) -> Self {
        match e {
            NnError::NonFiniteGradient(_) => Error::Numerical(e.to_string()),
            NnError::InvalidConfig(_) => Error::Config(e.to_string()),
            _ => Error::Input(e.to_string()),
        }
    }
}

impl From<TrainError> for Error {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Network(n) => n.into(),
            TrainError::NonFiniteLoss { .. } => Error::Numerical(e.to_string()),
            TrainError::InvalidConfig(_) => Error::Config(e.to_string()),
            _ => Error::Input(e.to_string()),
        }
    }
}

impl From<EvalError> for Error {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Train(t) => t.into(),
            EvalError::UnknownCase(_) | EvalError::InconsistentCase { .. } => Error::Config(e.to_string()),
            _ => Error::Input(e.to_string()),
        }
    }
}

impl From<SearchError> for Error {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::InvalidConfig(_) => Error::Config(e.to_string()),
            _ => Error::Numerical(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Input(format!("json: {e}"))
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Input(format!("csv: {e}"))
    }
}
