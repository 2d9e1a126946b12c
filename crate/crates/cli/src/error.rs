//! Error surface of the binary, split by exit code: configuration problems
//! (bad TOML, unknown keys, unusable parameter values) exit with 2, runtime
//! failures (solver breakdowns, norm drift, refused output) with 1.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// The run never started: the configuration is unusable. Exit code 2.
    Config(String),
    /// The run started and failed: numerical or I/O trouble. Exit code 1.
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::Run(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ring_noon_core::Error> for CliError {
    fn from(e: ring_noon_core::Error) -> Self {
        use ring_noon_core::Error;
        match e {
            // Parameter validation happens before any numerics run, so these
            // are configuration mistakes, not runtime failures.
            Error::InvalidParams(_) | Error::BasisTooLarge { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Run(e.to_string()),
        }
    }
}
