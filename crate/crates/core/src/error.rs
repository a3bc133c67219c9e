//! Crate-wide error type and result alias.

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
///
/// The CLI maps variants onto exit codes: configuration problems exit 2,
/// solver failures exit 3, and IO failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller passed a value outside an operation's domain (bad mesh size,
    /// unsupported polynomial degree, out-of-range quadrature degree, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A run configuration failed validation before any computation started.
    #[error("configuration: {0}")]
    Config(String),

    /// Conjugate gradients detected non-positive curvature: the operator is
    /// not symmetric positive definite on the solved subspace.
    #[error("operator not SPD: {0}")]
    NotSpd(String),

    /// An iterative solve hit its iteration cap before reaching tolerance.
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The active-set loop did not reach a self-consistent active set.
    #[error(
        "active-set iteration stalled after {iterations} sweeps \
         ({active} active constraints, stationarity {stationarity:.3e})"
    )]
    ActiveSetStalled {
        iterations: usize,
        active: usize,
        stationarity: f64,
    },

    /// An energy evaluation came out negative beyond rounding, which means
    /// the penalty parameter is below the coercivity threshold.
    #[error("energy form not coercive: v'Av = {value:.3e} < 0")]
    NotCoercive { value: f64 },

    /// A problem exceeded a size cap (the dense QP oracle caps at 300 DOFs).
    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config parse: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
