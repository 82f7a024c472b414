use std::fmt;
use std::process::ExitCode;

use tbmps::engine::EngineError;
use tbmps::model::ConfigError;
use tbmps::oracle::OracleError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Budget(String),
    Tolerance { deviation: f64, tolerance: f64 },
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Config(_) => 1,
            CliError::Budget(_) => 2,
            CliError::Tolerance { .. } => 3,
            CliError::Runtime(_) => 4,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Budget(msg) => write!(f, "aborted: {msg}"),
            CliError::Tolerance { deviation, tolerance } => {
                write!(f, "max deviation {deviation:.6e} exceeds tolerance {tolerance:.6e}")
            }
            CliError::Runtime(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(c) => CliError::Config(c.to_string()),
            EngineError::TruncationBudget { .. } => CliError::Budget(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Runtime(format!("oracle: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
