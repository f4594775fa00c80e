use thiserror::Error;

use crate::calibration::RoundRecord;
use crate::protocols::DecaySeries;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The master-equation integrator could not make progress.
    #[error("simulation failed at t = {time:.6e} s (step {step:.3e} s): {message}")]
    Simulation { message: String, time: f64, step: f64 },

    /// A least-squares fit did not converge or was ill-posed. Decay fits
    /// attach the series they were given so the caller can still report it.
    #[error("fit failed: {message}")]
    Fit {
        message: String,
        series: Option<Box<DecaySeries>>,
    },

    #[error("calibration did not converge: {message}")]
    Calibration { message: String, trace: Vec<RoundRecord> },

    /// A sweep did not bracket the quantity it was looking for.
    #[error("out of range: {0}")]
    Range(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn fit(msg: impl Into<String>) -> Self {
        Error::Fit {
            message: msg.into(),
            series: None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
