use std::process::ExitCode;

use ffd_recon::Error;
use thiserror::Error as ThisError;

/// Why a command stopped. Each kind has its own process exit code.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad flags, config, or input files. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// A solver or metric could not produce a finite answer. Exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Degenerate(_)
            | Error::NonFinite(_)
            | Error::SingularSystem { .. }
            | Error::RankDeficient(_)
            | Error::Divergence { .. }
            | Error::EmptyUnion
            | Error::FrameMismatch
            | Error::AllNodesFailed(_) => CliError::Numerical(msg),
            _ => CliError::Input(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// How a command that did not fail ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some pairs, nodes or instances were skipped. Exit code 4.
    Partial,
}

impl Outcome {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Outcome::Complete => ExitCode::SUCCESS,
            Outcome::Partial => ExitCode::from(4),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
