use thiserror::Error;

/// Errors raised by the solvers and simulation harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "communication graph is not strongly connected: node {to} is unreachable from node {from}"
    )]
    NotStronglyConnected { from: usize, to: usize },

    #[error("matrix {name} is singular or not positive definite")]
    SingularBlock { name: String },

    #[error("{what} is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("gain equation residual {residual:e} exceeds tolerance {tolerance:e}")]
    Residual { residual: f64, tolerance: f64 },

    #[error("negative team cost {value:e} at step {step}")]
    NegativeCost { value: f64, step: usize },

    #[error("Riccati iteration did not converge within {iterations} iterations (last relative change {change:e})")]
    NotConverged { iterations: usize, change: f64 },

    #[error("steady-state closed loop A(I - K C) has spectral radius {radius} >= 1")]
    Unstable { radius: f64 },

    #[error("time {t} outside the gain schedule horizon {horizon}")]
    Horizon { t: usize, horizon: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
