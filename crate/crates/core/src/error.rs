use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("budget exceeded: {0}")]
    Budget(String),

    /// The operation is mathematically unjustified for the given input.
    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}

/// A non-fatal condition attached to a result. Flags never hide output; they
/// escalate to warnings in run manifests and to exit code 2 in the CLI.
#[derive(Debug, Clone, PartialEq)]
pub enum Flag {
    /// Radius above 1 placed in the `k = -1` scale bucket.
    RadiusAboveOne { index: usize },
    /// `contract_ball` was called with `delta < 1`.
    Expansion,
    BudgetExceeded(String),
    EmptySelection(String),
    Truncated(String),
    PreconditionViolated(String),
    Degenerate(String),
    NonMonotone(String),
    Note(String),
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flag::RadiusAboveOne { index } => write!(f, "radius above 1 at index {index}"),
            Flag::Expansion => write!(f, "contraction exponent below 1 expands the ball"),
            Flag::BudgetExceeded(m) => write!(f, "budget exceeded: {m}"),
            Flag::EmptySelection(m) => write!(f, "empty selection: {m}"),
            Flag::Truncated(m) => write!(f, "truncated: {m}"),
            Flag::PreconditionViolated(m) => write!(f, "precondition violated: {m}"),
            Flag::Degenerate(m) => write!(f, "degenerate input: {m}"),
            Flag::NonMonotone(m) => write!(f, "non-monotone: {m}"),
            Flag::Note(m) => write!(f, "{m}"),
        }
    }
}
