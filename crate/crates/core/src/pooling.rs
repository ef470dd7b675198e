//! Measurement-based pooling of two state assignments.
//!
//! Starting from the maximally mixed state, a joint measurement with positive
//! operators `E₀₀, E₀₁, E₁₀, E₁₁` is built so that outcome `(0,0)` yields the
//! joint state `ρ_AB = R / Tr R`, Alice's marginal outcome yields `ρ_A` and
//! Bob's yields `ρ_B`. The probability of `(0,0)` is `c·Tr R / D`, so `R` is
//! the BFM maximizer and `c` is the largest constant keeping `E₁₁ ≥ 0`.
//! When `R` is the trace-distance candidate this `c` has the closed form
//! `2/λ_max(ρ_A + ρ_B + |ρ_A − ρ_B|)`; otherwise the closed form can leave
//! `E₁₁` indefinite, so `c` is computed from `R` directly.

use rand::Rng;

use crate::compat::{is_compatible, k_bfm, StateSet};
use crate::error::{Error, Result};
use crate::qmat::{matrix_abs, DensityMatrix, HermitianOperator};
use crate::{random, DEFAULT_RANK_TOL};

#[derive(Clone, Debug)]
pub struct PoolingResult {
    pub a: DensityMatrix,
    pub b: DensityMatrix,
    pub joint_state: DensityMatrix,
    /// Largest `c` keeping `E₁₁ = I − c(ρ_A + ρ_B − R)` positive.
    pub c: f64,
    /// `2/λ_max(ρ_A + ρ_B + |ρ_A − ρ_B|)`, which equals `c` when `R` is the
    /// trace-distance candidate `(ρ_A + ρ_B − |ρ_A − ρ_B|)/2`.
    pub c_closed_form: f64,
    pub r: HermitianOperator,
    pub e00: HermitianOperator,
    pub e01: HermitianOperator,
    pub e10: HermitianOperator,
    pub e11: HermitianOperator,
    pub p00: f64,
    /// `K(ρ_A, ρ_B)` as returned by the BFM solve.
    pub k_value: f64,
    /// Largest cosine of a principal angle between `supp(E₀₁)` and
    /// `supp(E₁₀)`; values near 1 mean the supports intersect.
    pub block_support_overlap: f64,
}

impl PoolingResult {
    pub fn blocks(&self) -> [&HermitianOperator; 4] {
        [&self.e00, &self.e01, &self.e10, &self.e11]
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }
}

/// Eigenvalues at or below this fraction of a block's largest eigenvalue
/// (and below this absolute level) count as outside its support.
pub const BLOCK_SUPPORT_TOL: f64 = 1e-7;

pub fn pool_measurement(a: &DensityMatrix, b: &DensityMatrix, tol: f64) -> Result<PoolingResult> {
    let set = StateSet::pair(a.clone(), b.clone())?;
    if !is_compatible(&set, DEFAULT_RANK_TOL) {
        return Err(Error::Incompatible);
    }
    let report = k_bfm(&set, tol)?;
    if report.value <= tol {
        return Err(Error::Incompatible);
    }
    let r = report.primal_witness.clone();
    let d = a.dim();

    let sum = a.op() + b.op();
    let spread = matrix_abs(&(a.op() - b.op()));
    let c_closed_form = 2.0 / (&sum + &spread).max_eigenvalue();
    let c = 1.0 / (&sum - &r).max_eigenvalue();

    let e00 = r.scale(c);
    let e01 = &a.op().scale(c) - &e00;
    let e10 = &b.op().scale(c) - &e00;
    let e11 = &HermitianOperator::identity(d) - &(&sum - &r).scale(c);

    let joint_state = DensityMatrix::normalized(&r)?;
    let p00 = e00.trace() / d as f64;
    let block_support_overlap = support_overlap(&e01, &e10);
    Ok(PoolingResult {
        a: a.clone(),
        b: b.clone(),
        joint_state,
        c,
        c_closed_form,
        r,
        e00,
        e01,
        e10,
        e11,
        p00,
        k_value: report.raw_value,
        block_support_overlap,
    })
}

fn support_overlap(x: &HermitianOperator, y: &HermitianOperator) -> f64 {
    let basis = |h: &HermitianOperator| {
        let e = h.eig();
        let cut = BLOCK_SUPPORT_TOL.max(BLOCK_SUPPORT_TOL * e.max());
        e.columns_where(|v| v > cut)
    };
    let (u, v) = (basis(x), basis(y));
    if u.ncols() == 0 || v.ncols() == 0 {
        return 0.0;
    }
    (u.adjoint() * v)
        .singular_values()
        .iter()
        .fold(0.0, |m: f64, &s| m.max(s))
}

/// Outcome of probing `R` against random positive enlargements.
#[derive(Clone, Debug, PartialEq)]
pub struct RMaximalityReport {
    pub trials: usize,
    /// Enlargements `R′ ≥ R` that stayed below both states.
    pub feasible: usize,
    /// Feasible enlargements that raised `Tr R` by more than the tolerance.
    pub violations: usize,
    pub max_trace_gain: f64,
}

/// Slack allowed when testing `R′ ≤ ρ`.
const ENLARGEMENT_PSD_TOL: f64 = 1e-10;
const TRACE_GAIN_TOL: f64 = 1e-7;

/// Tries `trials` random PSD enlargements `R′ = R + P` at assorted scales and
/// counts those that remain below both states while increasing the trace.
pub fn verify_r_maximality(result: &PoolingResult, trials: usize, seed: u64) -> RMaximalityReport {
    let mut rng = random::seeded(seed);
    let d = result.dim();
    let mut feasible = 0;
    let mut violations = 0;
    let mut max_trace_gain = 0.0f64;
    for _ in 0..trials {
        let rank = rng.random_range(1..=d);
        let scale = 10f64.powf(-rng.random_range(1.0..9.0));
        let p = random::density(d, rank, &mut rng).op().scale(scale);
        let enlarged = &result.r + &p;
        let fits = |rho: &DensityMatrix| (rho.op() - &enlarged).min_eigenvalue() >= -ENLARGEMENT_PSD_TOL;
        if fits(&result.a) && fits(&result.b) {
            feasible += 1;
            let gain = enlarged.trace() - result.r.trace();
            max_trace_gain = max_trace_gain.max(gain);
            if gain > TRACE_GAIN_TOL {
                violations += 1;
            }
        }
    }
    RMaximalityReport {
        trials,
        feasible,
        violations,
        max_trace_gain,
    }
}
