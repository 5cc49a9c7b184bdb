use alloc::string::String;

/// Errors raised by the estimators and simulators.
///
/// Variants are grouped so that a front end can map them onto exit codes:
/// [`Error::is_config`] covers invalid inputs and parameters, everything else
/// is a numerical failure.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("lag {lag} outside the supported regime for n = {n} (requires {rule})")]
    LagOutOfRegime { lag: usize, n: usize, rule: &'static str },
    #[error("missing lag {0} in autocovariance set")]
    MissingLag(usize),
    #[error("process is not stationary: {0}")]
    Unstable(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("bound diverges: {0}")]
    DivergentBound(String),
    #[error("model does not expose its innovations")]
    UnsupportedModel,
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("singular matrix")]
    Singular,
    #[error("frequency grid mismatch")]
    GridMismatch,
    #[error("empty range: {0}")]
    EmptyRange(String),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Dimension(_)
                | Error::LagOutOfRegime { .. }
                | Error::MissingLag(_)
                | Error::UnsupportedModel
                | Error::GridMismatch
                | Error::EmptyRange(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
