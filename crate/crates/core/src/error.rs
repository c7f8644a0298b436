use thiserror::Error;

/// Failure modes of the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("ill-conditioned linear system in {context} (condition estimate {condition:e})")]
    IllConditioned { context: &'static str, condition: f64 },
    #[error("singular critic Gram matrix (smallest singular value {min_singular:e})")]
    SingularGram { min_singular: f64 },
    #[error("formula domain error in {formula}: {term} = {value:e} is outside the domain")]
    FormulaDomain {
        formula: &'static str,
        term: &'static str,
        value: f64,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True for errors caused by bad inputs rather than numerical breakdown.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::DimensionMismatch { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
