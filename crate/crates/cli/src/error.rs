use std::path::PathBuf;

use thiserror::Error;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] fairsvdd::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use fairsvdd::Error as E;
        match self {
            CliError::Config(_) => exit::CONFIG,
            CliError::Io { .. } => exit::IO,
            CliError::Core(e) => match e {
                E::Io { .. } => exit::IO,
                E::Csv(c) if c.is_io_error() => exit::IO,
                E::InvalidArgument(_) => exit::CONFIG,
                E::NonFiniteLoss { .. } | E::StaleTape => exit::NUMERIC,
                _ => exit::DATA,
            },
        }
    }
}
