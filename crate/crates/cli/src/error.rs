use std::fmt;

use serde::Serialize;

/// Failure categories, each with its own process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Config,
    Io,
    Model,
    Numeric,
    Internal,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Internal => 1,
            ErrorKind::Config => 2,
            ErrorKind::Io => 3,
            ErrorKind::Model | ErrorKind::Numeric => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Io => "io",
            ErrorKind::Model => "model",
            ErrorKind::Numeric => "numeric",
            ErrorKind::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: ErrorKind, message: impl Into<String>) -> Self {
        CliError {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Config, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(ErrorKind::Io, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

impl From<spt_core::Error> for CliError {
    fn from(e: spt_core::Error) -> Self {
        use spt_core::Error as E;
        let kind = match &e {
            E::UnboundVariable(_) | E::MissingCache(_) => ErrorKind::Internal,
            E::ArgumentRange(_) | E::Parse(_) => ErrorKind::Config,
            E::InvalidModel(_) | E::Degeneracy(_) => ErrorKind::Model,
            E::FitConditioning(_)
            | E::SeriesTooShort(_)
            | E::WindowSelection(_)
            | E::TauGrid(_)
            | E::NonLinearity(_) => ErrorKind::Numeric,
        };
        CliError::new(kind, e.to_string())
    }
}

impl From<crate::config::ParseError> for CliError {
    fn from(e: crate::config::ParseError) -> Self {
        CliError::config(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
