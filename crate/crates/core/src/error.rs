use std::path::PathBuf;

/// Errors raised by the optimization library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// The objective broke one of the standing assumptions (F1: bounded below by
    /// zero, F2: finite/differentiable values).
    #[error("assumption {assumption} violated: {detail}")]
    AssumptionViolation {
        assumption: &'static str,
        detail: String,
    },

    #[error("numeric failure at iteration {iter}: {detail}")]
    NumericFailure { iter: usize, detail: String },

    #[error("Lipschitz certification failed for `{name}`: ratio {ratio} > declared {declared} between {a:?} and {b:?}")]
    CertificationFailure {
        name: String,
        ratio: f64,
        declared: f64,
        a: Vec<f64>,
        b: Vec<f64>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("malformed file {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
