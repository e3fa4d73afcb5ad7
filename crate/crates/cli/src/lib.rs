//! Library surface of the `shapestore` command-line tool.
//!
//! Each subcommand is a pure function from resolved inputs to a JSON payload
//! (plus optional sidecar files), so the binary stays a thin argument-parsing
//! and printing shell and the integration tests drive the same code paths.
//!
//! Output conventions: exact quantities appear as `"p/q"` strings, floats as
//! JSON numbers with 17 significant digits, and every payload embeds the run
//! manifest that reproduces it.

pub mod commands;
pub mod jsonfmt;
pub mod manifest;

pub use commands::{
    cmd_analyze, cmd_certify, cmd_drift_check, cmd_simulate, cmd_validate, CmdResult, DriftCases,
    SimOverrides,
};

use shapestore_core::Error as CoreError;

/// Exit discipline: 0 success (scientific verdicts included), 1 usage or
/// parse problems, 2 violated internal assertions.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        if e.is_internal() {
            CliError::Internal(e.to_string())
        } else {
            CliError::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message())
    }
}

impl std::error::Error for CliError {}
