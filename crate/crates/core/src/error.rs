use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An invalid configuration value. `field` names the offending key.
    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The tridiagonal solve met a vanishing pivot.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// `t_d` earlier than (or at) the perturbation reference instant.
    #[error("degenerate timing: {0}")]
    DegenerateTiming(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn argument(message: impl Into<String>) -> Self {
        Error::Argument(message.into())
    }

    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Argument(_) | Error::DegenerateTiming(_) => 2,
            Error::NumericalBreakdown(_) => 3,
            Error::Io(_) | Error::Json(_) => 4,
        }
    }
}
