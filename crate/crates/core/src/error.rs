use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("configurations are not interlaced: {0}")]
    NotInterlaced(String),
    #[error("{what}: eigen residual {residual:e} exceeds {tolerance:e}")]
    Eigen {
        what: String,
        residual: f64,
        tolerance: f64,
    },
    #[error("rejection sampler gave up after {0} attempts")]
    SamplerExhausted(usize),
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("path left the domain: {0}")]
    Domain(String),
    #[error("truncated series not converged: {0}")]
    Convergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
