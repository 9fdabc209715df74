use num_complex::Complex64;
use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("point outside the model domain: {0}")]
    Domain(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e}): {what}")]
    Convergence {
        what: String,
        iterations: usize,
        residual: f64,
        last: Option<Complex64>,
    },
    #[error("gradient requested strictly inside the zero phase at ({0}, {1})")]
    ZeroPhase(f64, f64),
    #[error("family {0} has no saddle point")]
    NoSaddle(&'static str),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("topology error: {0}")]
    Topology(String),
    #[error("minimization stopped after {} iterations with residual {:e}", .0.iterations, .0.residual)]
    NotConverged(Box<crate::variational::Minimized>),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
