use thiserror::Error;

/// Error type shared by every module in the crate.
///
/// Constructors validate eagerly: a value that violates a documented bound is
/// rejected here with the violated bound named, rather than surfacing later as
/// a NaN deep inside a sweep.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field is in {found:?} space, expected {expected:?}")]
    WrongSpace {
        expected: crate::field::Space,
        found: crate::field::Space,
    },

    #[error("solver aborted at step {step} (t = {t}): {reason}")]
    SolverAbort { step: usize, t: f64, reason: String },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("resource guard: {0}")]
    ResourceGuard(String),

    #[error("snapshot format: {0}")]
    SnapshotFormat(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
