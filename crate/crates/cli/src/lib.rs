//! Experiment runner behind the `diana` binary.

pub mod config;
pub mod output;
pub mod run;
pub mod sweep;
pub mod theory;

use std::fmt;

/// `git describe` of the build, prefixed with the crate version.
pub const VERSION: &str = env!("DIANA_VERSION");

/// Failures with a dedicated exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    /// Unreadable or invalid config; the message starts with the field path.
    Config(String),
    /// Parameters violate the analysis in strict mode.
    Validation(String),
    /// At least one seed diverged; outputs were still written.
    Diverged(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Validation(_) => 2,
            Failure::Diverged(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "{m}"),
            Failure::Validation(m) => write!(f, "strict mode: {m}"),
            Failure::Diverged(m) => write!(f, "diverged: {m}"),
        }
    }
}

impl std::error::Error for Failure {}
