//! Command-line front end: configuration loading, run directories and the
//! train / sweep / bench / stats commands.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::large_enum_variant)]

pub mod commands;
pub mod config;
pub mod rundir;

use corerl_core::Error;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_EVALUATOR: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// An error with the process exit code it maps to.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// Bad command-line input; shares the configuration exit code.
    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => EXIT_CONFIG,
            Error::Evaluator { .. } => EXIT_EVALUATOR,
            Error::Numeric(_) | Error::Domain(_) => EXIT_NUMERIC,
            Error::Contract(_) | Error::Io { .. } | Error::Json(_) => EXIT_OTHER,
        };
        Self::new(code, e.to_string())
    }
}
