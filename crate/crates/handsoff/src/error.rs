use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::ConfigError;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    /// Control tables, headers and other checks made before data flows.
    #[error("{0}")]
    Validation(String),
    #[error("{}: record {record}: {message}", path.display())]
    Data { path: PathBuf, record: usize, message: String },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Validation(_) => EXIT_CONFIG,
            Error::Data { .. } => EXIT_DATA,
            Error::Io { .. } => EXIT_IO,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Error {
        Error::Io { path: path.to_path_buf(), source }
    }

    pub fn data(path: &Path, record: usize, message: impl ToString) -> Error {
        Error::Data { path: path.to_path_buf(), record, message: message.to_string() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
