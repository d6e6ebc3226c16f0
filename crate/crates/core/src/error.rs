use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the range the routine accepts.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A point lies outside the domain where the quantity is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The coupling constant lies in a phase the routine does not cover.
    #[error("phase error: {0}")]
    Phase(String),

    /// Evaluation hit a pole or a zero denominator.
    #[error("singularity: {0}")]
    Singularity(String),

    /// Moment data does not come from a measure with infinite support.
    #[error("degenerate measure: |alpha_{index}| = {modulus} is not inside the unit disc")]
    DegenerateMeasure { index: usize, modulus: f64 },

    /// An identity that must hold along a computation failed numerically.
    #[error("identity violated at step {step}: residual {residual:e}")]
    IdentityViolation { step: usize, residual: f64 },

    /// Writing an export failed.
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        Error::Io(err.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Io(err.to_string())
    }
}
