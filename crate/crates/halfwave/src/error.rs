//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HalfwaveError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("iteration failed to converge: {0}")]
    NonConvergence(String),

    #[error("ground state lost positivity: min value {min:.3e} vs peak {peak:.3e}")]
    PositivityLoss { min: f64, peak: f64 },

    #[error("right-hand side not compatible with solver kernel: |<rhs,ker>|/|rhs||ker| = {ratio:.3e} > {tol:.3e}")]
    KernelIncompatible { ratio: f64, tol: f64 },

    #[error("bubble under-resolved: lambda = {lambda:.4e} < {min_lambda:.4e} = 4 * grid spacing")]
    UnderResolved { lambda: f64, min_lambda: f64 },

    #[error("numerical blow-up detected: {0}")]
    NumericalBlowup(String),

    #[error("convexity audit failed for cutoff bridge: min chi'' = {0:.3e}")]
    ConvexityAudit(f64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HalfwaveError>;
