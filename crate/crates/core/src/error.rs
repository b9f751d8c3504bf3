use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular matrix: eigenvalue {eigenvalue:e} is at or below the floor {floor:e}")]
    SingularMatrix { eigenvalue: f64, floor: f64 },

    #[error("state is not strictly positive (min eigenvalue {0:e})")]
    SingularState(f64),

    #[error("degenerate generator: {0}")]
    DegenerateGenerator(String),

    #[error("every denominator in the ensemble was degenerate ({skipped} points skipped)")]
    DegenerateEnsemble { skipped: usize },

    #[error("gradient-estimate curve has a non-integrable tail (fitted rate {rate})")]
    NonIntegrableTail { rate: f64 },

    #[error("entropy denominator {0:e} is too small: state equals its fixed-point projection")]
    DegenerateDenominator(f64),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
