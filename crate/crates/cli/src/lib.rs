//! Batch experiment runner around the `projsa` library: configuration
//! parsing, seeded replica execution, trace/report serialization, and the
//! prox self-test. The `projsa` binary exposes four subcommands (`run`,
//! `diagnose`, `prox-selftest`, `ode-compare`) with a stable exit-code
//! contract: 0 success, 1 self-test failure, 2 validation error, 3 runtime
//! error.

pub mod commands;
pub mod config;
pub mod io;
pub mod selftest;

use std::fmt;

/// Top-level command errors, mapped onto the exit-code contract.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or inputs (exit 2).
    Validation(String),
    /// Failures while executing a validated experiment (exit 3).
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}
