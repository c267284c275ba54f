//! Library half of the `r4varifold` binary. Integration tests drive the
//! commands through here as well as through the executable.

use std::fmt;

pub mod commands;
pub mod mesh;
pub mod report;
pub mod scenario;
pub mod suites;

pub use report::{Check, Report};
pub use scenario::{Construction, Scenario};

/// Environment variable holding the worker thread count.
pub const THREADS_VAR: &str = "VARIFOLD_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or scenario text.
    Parse(String),
    /// A library call rejected its input.
    Domain(r4varifold::Error),
    Io(std::io::Error),
}

impl CliError {
    /// 2 for usage and parse problems, 3 for domain errors. Check failures
    /// are not errors; they exit with 1 through the report.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Domain(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m) => write!(f, "{m}"),
            CliError::Domain(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<r4varifold::Error> for CliError {
    fn from(e: r4varifold::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
