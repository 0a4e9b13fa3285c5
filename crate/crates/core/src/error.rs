use thiserror::Error;

/// Errors raised by environment construction, ground-truth analysis,
/// the LSA recursion and the inference routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no solvable lake layout found in {attempts} resamples")]
    LayoutInfeasible { attempts: usize },

    #[error("policy iteration did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },

    #[error("reducible chain: {0}")]
    ReducibleChain(String),

    #[error("degenerate feature row {row}: norm stayed below 1e-8 after {attempts} draws")]
    DegenerateFeatures { row: usize, attempts: usize },

    #[error("design matrix is degenerate: smallest eigenvalue {lambda_min:e}")]
    DegenerateDesign { lambda_min: f64 },

    #[error("mean system matrix is singular (condition number {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("Poisson equation residual {residual:e} exceeds tolerance")]
    PoissonResidual { residual: f64 },

    #[error("Lyapunov equation is singular: {0}")]
    LyapunovSingular(String),

    #[error("LSA iterate diverged at step {step} (|θ| = {magnitude:e})")]
    Diverged { step: usize, magnitude: f64 },

    #[error("block length {block_len} is invalid for a trajectory of length {n}")]
    BlockTooLong { block_len: usize, n: usize },

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("malformed document: {0}")]
    Document(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
