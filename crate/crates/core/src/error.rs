use thiserror::Error;

/// Errors raised by the simulator and the synthesis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A physical parameter record that violates its invariants.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// The time grid does not contain the wave packet.
    #[error("truncation: {0}")]
    Truncation(String),

    /// Two arrays that must share a time grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// The requested schedule cannot be realized with a finite drive.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// The input envelope vanishes inside the window, so its logarithmic
    /// derivative is singular.
    #[error("envelope vanishes at t = {time}: logarithmic derivative is singular")]
    SingularEnvelope { time: f64 },

    /// Step refinement did not reach the requested accuracy.
    #[error("numeric convergence failure: {0}")]
    NumericConvergence(String),

    /// The mode bank cannot represent the pulse spectrum.
    #[error("bandwidth violation: {message} (spectral leakage {leakage:.3e})")]
    Bandwidth { message: String, leakage: f64 },

    /// Malformed CSV input.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Parse(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
