use thiserror::Error;

/// Errors produced by the toolkit.
///
/// `Parse`, `Scenario` and `Dimension` indicate bad input (configuration
/// problems); `Structure` and `Degenerate` indicate data that fails a
/// mathematical precondition; `Eval` carries the offending subexpression.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("evaluation error in `{subexpr}`: {message}")]
    Eval { subexpr: String, message: String },

    #[error("structure validation failed: {0}")]
    Structure(String),

    #[error("degenerate point: {0}")]
    Degenerate(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid scenario: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by malformed input rather than failed checks.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Scenario(_) | Error::Dimension(_) | Error::Domain(_)
        )
    }
}
