use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside its admissible range. The message names the
    /// inequality that failed.
    #[error("parameter out of domain: {0}")]
    ParamDomain(String),

    #[error("regime mismatch: {0}")]
    Regime(String),

    /// An input that must come from a converged computation did not.
    #[error("dependency not converged: {0}")]
    Dependency(String),

    #[error("shooting bracket not found: {0}")]
    ShootingBracket(String),

    #[error("domain truncation: {0}")]
    Truncation(String),

    #[error("normalization fixed point failed: {0}")]
    Normalization(String),

    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("degenerate fiber coefficients: {0}")]
    DegenerateFiber(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("zero field cannot be projected onto the mass sphere")]
    ZeroField,

    #[error("too few points for a fit: need {need}, have {have}")]
    FitSkipped { need: usize, have: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
