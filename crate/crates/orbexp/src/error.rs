use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("expansion does not exist: {0}")]
    Existence(String),
    #[error("invalid angular coupling: {0}")]
    Coupling(String),
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Nonconvergence { estimate: f64, error: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("index outside the regular range: {0}")]
    DistributionalRange(String),
    #[error("degree {0} exceeds the supported maximum")]
    DegreeExceeded(u32),
    #[error("derivative unavailable: {0}")]
    DerivativeUnavailable(String),
    #[error("sequence transformation breakdown: {0}")]
    Breakdown(String),
    #[error("invalid index: {0}")]
    InvalidIndex(String),
}

pub type Result<T> = std::result::Result<T, Error>;
