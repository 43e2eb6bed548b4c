//! Batch commands behind the `tmdt` binary.

pub mod commands;
pub mod config;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    #[error("configuration error: {0}")]
    Config(String),
    /// A check failed or a run could not complete; exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o error: {e}"))
    }
}

impl From<tmdt_core::Error> for CliError {
    fn from(e: tmdt_core::Error) -> Self {
        use tmdt_core::Error as E;
        match e {
            E::Config(_)
            | E::InvalidWidth(_)
            | E::InvalidSuffixLength { .. }
            | E::InvalidPrefixLength(_)
            | E::UnknownDifficulty(_)
            | E::InsufficientStarts { .. }
            | E::ZeroChainLength
            | E::TableMismatch(_)
            | E::NoTableForDifficulty { .. } => CliError::Config(e.to_string()),
            other => CliError::Failed(other.to_string()),
        }
    }
}
