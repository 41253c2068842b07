use thiserror::Error;

use crate::task::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid task:\n{0}")]
    Invalid(ValidationReport),

    #[error("unknown state `{0}`")]
    UnknownState(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("invalid monitor: {0}")]
    InvalidMonitor(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("{what} has {count} elements, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: u128,
        cap: u128,
    },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown gallery fixture `{0}`")]
    UnknownFixture(String),

    #[error("inconsistent state: {0}")]
    Inconsistent(String),
}
