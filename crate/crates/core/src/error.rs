use thiserror::Error;

/// Errors raised by the laws, solver, sampling and experiment layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("fixed-point iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("iterate left the upper half-plane at z = {re}+{im}i after {retries} damping reductions")]
    LeftUpperHalfPlane { re: f64, im: f64, retries: u32 },

    #[error("matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("eigensolver failed: {0}")]
    Eigensolver(String),

    #[error("quadrature node hit a singularity: |1 + t m| = {0:e}")]
    Singularity(f64),

    #[error("empty bulk window: kappa = {kappa} exceeds the maximum {max}")]
    EmptyWindow { kappa: f64, max: f64 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("experiment failed: {failed} of {trials} trials failed")]
    ExperimentThreshold { failed: usize, trials: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
