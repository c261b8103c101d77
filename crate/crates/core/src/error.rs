use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Library-wide error type.
///
/// Structural problems (shape mismatches, unknown labels) are kept distinct
/// from constraint violations (a well-shaped table that fails normalization
/// or no-signalling), so callers can tell "bad input" apart from "valid input
/// that is rejected".
#[derive(Debug, Error)]
pub enum Error {
    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("constraint violation: {0}")]
    Constraint(String),

    #[error("unsupported level: {0}")]
    Level(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("structural precondition not met: {0}")]
    Structure(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
