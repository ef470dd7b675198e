//! Compatibility of quantum state assignments.
//!
//! Given several density matrices assigned to the same system, this crate
//! decides whether they can be mutually compatible and measures how compatible
//! they are under three criteria:
//!
//! * BFM: the largest trace of a positive operator lying below every state;
//! * PP (post-Peierls): the largest trace of a Hermitian operator below every
//!   state, dual to minimum-error state exclusion;
//! * ES (equal support): the largest `λ` with `λ Σⱼ ρⱼ ≤ ρᵢ` for all `i`.
//!
//! Each measure is a semidefinite program solved by the small primal-dual
//! interior point solver in [`sdp`], which returns both a primal witness and a
//! dual certificate. The crate also provides maximum-entropy state assignment
//! ([`maxent`]), measurement-based pooling of two assignments ([`pooling`]) and
//! the two qubit experiments in [`scenarios`].

pub mod compat;
pub mod error;
pub mod maxent;
pub mod pooling;
pub mod qmat;
pub mod random;
pub mod scenarios;
pub mod sdp;

pub use compat::{CompatibilityReport, Criterion, StateSet};
pub use error::{Error, Result};
pub use maxent::{ExpectationConstraint, MaxEntResult};
pub use pooling::PoolingResult;
pub use qmat::{CMat, Complex64, DensityMatrix, HermitianOperator, SupportProjector};
pub use sdp::{SdpProblem, SdpSolution, SolveStatus, SolverOptions};

/// Default relative rank tolerance for supports.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
