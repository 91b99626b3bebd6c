use std::fmt::Display;

use thiserror::Error;

/// A failed command, carrying its process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or invalid configuration or input files.
    #[error("bad configuration: {0}")]
    Config(String),
    /// Not enough sightings to start the filter or build a map.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// A snapshot or gang the command needs does not exist.
    #[error("not found: {0}")]
    NotFound(String),
    #[error("nothing to assess: {0}")]
    NoInstances(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Config(_) => 2,
            CliError::InsufficientData(_) => 3,
            CliError::NotFound(_) => 4,
            CliError::NoInstances(_) => 5,
        }
    }

    pub fn config(e: impl Display) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<gangtrack_core::Error> for CliError {
    fn from(e: gangtrack_core::Error) -> Self {
        use gangtrack_core::Error as E;
        match e {
            E::InsufficientHistory { .. } | E::EmptyHistory => CliError::InsufficientData(e.to_string()),
            E::InvalidParameter(_) | E::OutOfRegion { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
