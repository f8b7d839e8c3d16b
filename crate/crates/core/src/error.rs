use thiserror::Error;

/// Errors produced by the numerical and statistical layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("series did not converge: {0}")]
    Convergence(String),
    #[error("quadrature failed: {what} (estimated error {error_estimate:e} after {subdivisions} subdivisions)")]
    Quadrature {
        what: String,
        error_estimate: f64,
        subdivisions: usize,
    },
    #[error("root finding failed: {0}")]
    RootFinding(String),
    #[error("density {density:e} below positivity floor at {location}")]
    Singularity { density: f64, location: String },
    #[error("optimization failed after {iterations} iterations (gradient norm {gradient_norm:e}): {reason}")]
    Optimization {
        reason: String,
        iterations: usize,
        gradient_norm: f64,
        best_loglik: f64,
        best_estimate: Vec<f64>,
    },
    #[error("acceptance-rejection exceeded {0} proposals")]
    RejectionBudget(usize),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn ensure_finite<T: crate::Real>(x: T, name: &str) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}
