use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not Hermitian (max |A - A^dagger| = {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("matrix is not unitary (max |U^dagger U - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("zero vector has no Schmidt decomposition")]
    ZeroVector,

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error(
        "solver failure: {reason} (primal residual {primal_residual:e}, \
         dual residual {dual_residual:e}, gap {gap:e})"
    )]
    SolverFailure {
        reason: String,
        primal_residual: f64,
        dual_residual: f64,
        gap: f64,
    },

    #[error("outcome probability {probability:e} too small for a posterior")]
    ZeroOutcomeProbability { probability: f64 },

    #[error("seesaw step worsened the score from {before} to {after}")]
    NonMonotoneStep { before: f64, after: f64 },

    #[error("infeasible tester: {0}")]
    InfeasibleTester(String),
}

pub type Result<T> = std::result::Result<T, Error>;
