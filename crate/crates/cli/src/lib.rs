//! Command-line front end for the `ffd_recon` pipeline.
//!
//! The binary is a thin wrapper over [`commands`]; tests drive the same
//! functions directly.

pub mod commands;
pub mod config;
pub mod error;
pub mod logging;

pub use config::PipelineConfig;
pub use error::{CliError, CliResult, Outcome};
