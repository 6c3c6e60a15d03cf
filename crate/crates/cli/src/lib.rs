//! Library backing the `wavedens` experiment binary; the subcommand
//! machinery lives here so the acceptance suite can drive it directly.

pub mod config;
pub mod csvio;
pub mod runner;

use thiserror::Error;

/// Process exit codes: configuration problems exit 2, numerical or
/// runtime failures exit 3.
#[derive(Error, Debug)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] wavedens::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Exit code for the process; bad inputs are 2, runtime failures 3.
    pub fn exit_code(&self) -> i32 {
        use wavedens::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::EtaOutOfRange { .. }
                | E::InvalidShape(_)
                | E::InvalidCorrelation { .. }
                | E::UnknownWavelet(_)
                | E::InvalidLevels { .. }
                | E::HypothesisViolation(_) => 2,
                _ => 3,
            },
            _ => 3,
        }
    }
}
