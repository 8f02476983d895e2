//! Command-level errors, exit codes and their machine-readable form.

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{msg}")]
    Data { kind: &'static str, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] fcd_core::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

/// What a failing command prints to stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorReport {
    pub error: String,
    pub module: String,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn data(kind: &'static str, msg: impl Into<String>) -> Self {
        CliError::Data { kind, msg: msg.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "InvalidConfig",
            CliError::Data { kind, .. } => kind,
            CliError::Io { .. } => "Io",
            CliError::Core(e) => e.kind(),
        }
    }

    pub fn module(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.module(),
            _ => "cli-io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        use fcd_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data { .. } | CliError::Io { .. } => EXIT_DATA,
            CliError::Core(e) => match e {
                E::InvalidConfig(_)
                | E::UnknownModel(_)
                | E::Parse { .. }
                | E::UnknownIdentifier { .. }
                | E::ContinuityUnsolvable(_) => EXIT_CONFIG,
                E::InvalidSignal(_)
                | E::TooFewPoints { .. }
                | E::SegmentTooSmall { .. }
                | E::EmptySegment
                | E::ExtrapolationError { .. } => EXIT_DATA,
                E::ContinuitySingular
                | E::EvalDomainError { .. }
                | E::NoClosedFormIntegral
                | E::SolveFailed(_)
                | E::BadInitialGuess => EXIT_NUMERIC,
            },
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind().into(),
            module: self.module().into(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
