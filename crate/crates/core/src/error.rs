use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("precondition not met: {0}")]
    Precondition(String),

    #[error("blow-up at step {step} (t = {time}): particle {particle} reached |x| = {magnitude:e}")]
    BlowUp {
        step: usize,
        time: f64,
        particle: usize,
        magnitude: f64,
    },

    #[error("fixed point did not converge after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("grid too small: boundary density is {ratio:e} of the maximum")]
    BoundaryMass { ratio: f64 },

    #[error("first measure is not absolutely continuous w.r.t. the second (mass at x = {at})")]
    NotAbsolutelyContinuous { at: f64 },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numeric failures (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::BlowUp { .. }
                | Error::NoConvergence { .. }
                | Error::BoundaryMass { .. }
                | Error::NotAbsolutelyContinuous { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
