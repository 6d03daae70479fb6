//! Configuration-driven driver for the `twotime` experiments.
//!
//! Exit codes: 0 success, 1 configuration error, 2 diverged run, 3 failed
//! claim check.

pub mod commands;
pub mod config;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

pub use commands::{Command, Invocation};

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid configuration.
    Config { path: PathBuf, line: Option<usize>, message: String },
    /// Output could not be written.
    Io(String),
    /// A run produced non-finite values.
    Diverged(String),
    /// A checked claim did not hold.
    ClaimFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Io(_) => 1,
            CliError::Diverged(_) => 2,
            CliError::ClaimFailed(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { path, line: Some(l), message } => {
                write!(f, "{}:{l}: {message}", path.display())
            }
            CliError::Config { path, line: None, message } => write!(f, "{}: {message}", path.display()),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Diverged(m) => write!(f, "diverged: {m}"),
            CliError::ClaimFailed(m) => write!(f, "claim check failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

/// Runs one invocation, reporting errors on `err`, and returns the exit
/// code.
pub fn run(inv: &Invocation, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match commands::execute(inv, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
