//! CLI error type and the exit-code contract.
//!
//! Exit codes: 0 success, 1 a verification ran and failed, 2 parse or
//! format problems (also clap usage errors), 3 empty inputs, 4 misaligned
//! inputs, 5 unknown strategy name.

use std::fmt;

use calens_core::CoreError;

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Format(String),
    Io(std::io::Error),
    UnknownStrategy(String),
}

impl CliError {
    pub fn format(msg: impl Into<String>) -> Self {
        CliError::Format(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(CoreError::EmptyInput { .. }) => 3,
            CliError::Core(CoreError::Misaligned { .. })
            | CliError::Core(CoreError::ShapeMismatch { .. }) => 4,
            CliError::UnknownStrategy(_) => 5,
            _ => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Format(msg) => write!(f, "{msg}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::UnknownStrategy(name) => write!(
                f,
                "unknown strategy `{name}`; expected one of logits, probs, tuned-logits, \
                 tuned-probs, calibrated-logits, calibrated-probs, calibrated-logits-marginal"
            ),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Format(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Format(format!("json: {e}"))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
