use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error(
        "noise ordering violated: idle error d = {idle:.3e} exceeds gate error g = {gate:.3e}"
    )]
    NoiseOrdering { idle: f64, gate: f64 },

    #[error("channel is not CPTP: {0}")]
    NotCptp(String),

    #[error("state norm collapsed: every Kraus branch has weight below {0:e}")]
    NormCollapse(f64),

    #[error("arity mismatch: channel acts on {expected} qubit(s), {found} target(s) given")]
    ArityMismatch { expected: usize, found: usize },

    #[error("malformed input at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
