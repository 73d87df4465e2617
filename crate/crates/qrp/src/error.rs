//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its documented domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration document failed validation.
    #[error("invalid config: {0}")]
    Config(String),

    /// A numerical quality guard tripped (trajectory truncation, grid
    /// resolution, series truncation).
    #[error("numerical quality failure: {0}")]
    NumericalQuality(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation problems, 3 for
    /// numerical-quality guards, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::Config(_) | Error::Json(_) => 2,
            Error::NumericalQuality(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
