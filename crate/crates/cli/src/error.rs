use std::fmt;

use deligan::Error;

/// A failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub const EXIT_FAILURE: i32 = 1;
/// Malformed config, missing input file or bad flags.
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_METRIC_UNAVAILABLE: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, format!("config error: {}", message.into()))
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_)
            | Error::Format(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Length(_)
            | Error::Data(_) => EXIT_INPUT,
            Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_INPUT,
            Error::Dimension { .. } => EXIT_INPUT,
            Error::MetricUnavailable(_) => EXIT_METRIC_UNAVAILABLE,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}
