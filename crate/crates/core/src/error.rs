use thiserror::Error;

/// Errors raised by the decomposition pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid signal: {0}")]
    InvalidSignal(String),

    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("segment too small: {points} points cannot hold {segments} segments")]
    SegmentTooSmall { points: usize, segments: usize },

    #[error("unknown model `{0}`")]
    UnknownModel(String),

    #[error("parse error at position {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("continuity cannot be solved in closed form: {0}")]
    ContinuityUnsolvable(String),

    #[error("continuity system is singular for the current parameters")]
    ContinuitySingular,

    #[error("model evaluation produced a non-finite value at index {index}")]
    EvalDomainError { index: usize },

    #[error("expression has no closed-form antiderivative")]
    NoClosedFormIntegral,

    #[error("linear solve failed: {0}")]
    SolveFailed(String),

    #[error("initial guess yields non-finite residuals")]
    BadInitialGuess,

    #[error("segment contains no points")]
    EmptySegment,

    #[error("x = {x} lies outside the fitted range [{lo}, {hi}]")]
    ExtrapolationError { x: f64, lo: f64, hi: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// Stable machine-readable name of the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSignal(_) => "InvalidSignal",
            Error::TooFewPoints { .. } => "TooFewPoints",
            Error::SegmentTooSmall { .. } => "SegmentTooSmall",
            Error::UnknownModel(_) => "UnknownModel",
            Error::Parse { .. } => "ParseError",
            Error::UnknownIdentifier { .. } => "UnknownIdentifier",
            Error::ContinuityUnsolvable(_) => "ContinuityUnsolvable",
            Error::ContinuitySingular => "ContinuitySingular",
            Error::EvalDomainError { .. } => "EvalDomainError",
            Error::NoClosedFormIntegral => "NoClosedFormIntegral",
            Error::SolveFailed(_) => "SolveFailed",
            Error::BadInitialGuess => "BadInitialGuess",
            Error::EmptySegment => "EmptySegment",
            Error::ExtrapolationError { .. } => "ExtrapolationError",
            Error::InvalidConfig(_) => "InvalidConfig",
        }
    }

    /// The pipeline stage that raised the error.
    pub fn module(&self) -> &'static str {
        match self {
            Error::InvalidSignal(_) | Error::TooFewPoints { .. } | Error::SegmentTooSmall { .. } => {
                "signal"
            }
            Error::UnknownModel(_)
            | Error::Parse { .. }
            | Error::UnknownIdentifier { .. }
            | Error::ContinuityUnsolvable(_)
            | Error::ContinuitySingular
            | Error::EvalDomainError { .. }
            | Error::NoClosedFormIntegral => "models",
            Error::SolveFailed(_) | Error::BadInitialGuess => "optimizer",
            Error::EmptySegment | Error::ExtrapolationError { .. } => "decompose",
            Error::InvalidConfig(_) => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
