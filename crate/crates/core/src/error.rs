use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or parameters, detected before any heavy computation.
    Config,
    /// A numerical procedure failed (bracketing, convergence).
    Numeric,
    /// A computed object violates an invariant it must satisfy.
    Invariant,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),

    #[error("parameter out of range: {0}")]
    Parameter(String),

    #[error("index out of range: {what} = {value} (limit {limit})")]
    OutOfRange {
        what: &'static str,
        value: u64,
        limit: u64,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("size cap exceeded: {needed} cubes requested, cap is {cap}")]
    Capacity { needed: u64, cap: u64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("singular evaluation: {0}")]
    Singular(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("no convergence after {iterations} iterations (last two iterates {previous:e}, {last:e})")]
    NoConvergence {
        iterations: usize,
        previous: f64,
        last: f64,
    },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Bracket(_) | Error::NoConvergence { .. } | Error::Calibration(_) => {
                ErrorKind::Numeric
            }
            Error::Invariant(_) => ErrorKind::Invariant,
            _ => ErrorKind::Config,
        }
    }
}
