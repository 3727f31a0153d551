use thiserror::Error;

use crate::numeric::SymMatrix;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("duplicate observation for unit {unit} at time {time}")]
    Duplicate { unit: String, time: f64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("ill-conditioned matrix: smallest eigenvalue {min_eigenvalue:e}, condition number {condition:e}")]
    Conditioning { min_eigenvalue: f64, condition: f64 },

    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    Convergence {
        iterations: usize,
        last_change: f64,
        last: Box<SymMatrix>,
    },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("truncated normal region has numerically zero probability in coordinate {coordinate}")]
    DegenerateRegion { coordinate: usize },

    #[error("no observation carries kernel weight near t = {t}")]
    EmptyWindow { t: f64 },

    #[error("local likelihood at t = {t} is not identified: all weighted mass is truncated on one side")]
    NonIdentified { t: f64 },

    #[error("curve fit failed at gridpoints {gridpoints:?}")]
    CurveFit { gridpoints: Vec<f64> },

    #[error("design matrix is rank deficient; collinear columns: {columns:?}")]
    Collinearity { columns: Vec<String> },

    #[error("unknown unit id {0}")]
    Lookup(String),

    #[error("all eigenvalues are zero")]
    DegenerateSpectrum,

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Errors caused by malformed input or configuration rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Domain(_) | Error::Duplicate { .. } | Error::Lookup(_) | Error::Config(_)
        )
    }
}
