use thiserror::Error;

use crate::maxent::MaxEntResult;
use crate::sdp::SolveStatus;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian: anti-Hermitian deviation {deviation:.3e} exceeds {limit:.3e}")]
    NonHermitian { deviation: f64, limit: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trace is {trace:.12}, expected 1")]
    NotUnitTrace { trace: f64 },

    #[error("matrix is not positive semidefinite: minimum eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { min_eigenvalue: f64 },

    #[error("logarithm of a matrix with eigenvalue {min_eigenvalue:.3e} <= 0")]
    SingularLog { min_eigenvalue: f64 },

    #[error("states do not commute: commutator norm {norm:.3e}")]
    NotCommuting { norm: f64 },

    #[error("a state set needs at least two states, got {0}")]
    TooFewStates(usize),

    #[error("invalid semidefinite program: {0}")]
    InvalidProblem(String),

    #[error("solver stopped with status {status:?} (gap {gap:.3e}, after {iterations} iterations)")]
    Solver {
        status: SolveStatus,
        gap: f64,
        iterations: usize,
    },

    #[error("constraints are inconsistent: no density matrix satisfies them (violation {violation:.3e})")]
    Infeasible { violation: f64 },

    #[error("maximum-entropy state lies on the boundary of the state space (multiplier norm {:.3e})", .0.multiplier_norm())]
    BoundaryState(Box<MaxEntResult>),

    #[error("states are incompatible: no joint state exists")]
    Incompatible,
}

pub type Result<T> = std::result::Result<T, Error>;
