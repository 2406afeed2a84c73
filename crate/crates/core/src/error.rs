use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the crate.
///
/// Infeasible rule generation and non-converged fits are *outcomes*, not
/// errors; they are reported through [`crate::dqgen::DqOutcome`] and
/// [`crate::mmnl::EstimationResult::converged`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{what} would need {requested} entries, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("symmetric eigen-solver did not converge for the {n}-point Jacobi matrix")]
    EigenNonConvergence { n: usize },

    #[error("unsupported weight family `{0}` (expected `normal` or `uniform`)")]
    UnsupportedFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed rule file {}: line {line}: {msg}", path.display())]
    MalformedRule {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("rule violates invariant `{invariant}`: {detail}")]
    RuleInvariant {
        invariant: &'static str,
        detail: String,
    },

    #[error("rule `{key}` not found (looked for {})", tried.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    RuleNotFound { key: String, tried: Vec<PathBuf> },

    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error("study configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dimension_mismatch(what: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            what,
            expected,
            actual,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
