use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VERIFICATION_FAILED: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{field}: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Input(String),

    #[error("numerical failure: {0}")]
    Numerical(kalman_core::Error),

    #[error("{0}")]
    Estimation(kalman_core::Error),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl ToString) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Verification(_) => exit::VERIFICATION_FAILED,
            HarnessError::Numerical(_) => exit::NUMERICAL,
            HarnessError::Config { .. } | HarnessError::Input(_) | HarnessError::Estimation(_) | HarnessError::Io { .. } => {
                exit::INPUT
            }
        }
    }
}

impl From<kalman_core::Error> for HarnessError {
    fn from(e: kalman_core::Error) -> Self {
        if e.is_numerical() {
            HarnessError::Numerical(e)
        } else {
            HarnessError::Estimation(e)
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
