//! Compatibility measures for a set of state assignments.
//!
//! Three measures are built as semidefinite programs over a [`StateSet`]:
//!
//! * [`k_bfm`]: `max Tr R` over `0 ≤ R ≤ ρᵢ`;
//! * [`k_pp`]: `max Tr N` over Hermitian `N ≤ ρᵢ`;
//! * [`k_es`]: `max λ ≥ 0` with `λ Σⱼ ρⱼ ≤ ρᵢ`.
//!
//! Each report carries the optimal primal witness and the dual certificate,
//! so any reported value can be checked independently through weak duality.
//! The `oracle_*` functions are closed forms for special cases, kept
//! independent of the solver so the two can be compared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qmat::{
    c64, check_dims, commutator_norm, identity, inner, matrix_abs, projector_above, supports_intersection_basis,
    supports_intersection_dim, trace_distance, CMat, DensityMatrix, HermitianOperator,
};
use crate::sdp::{self, LinearMap, SdpProblem, SdpSolution, SolveStatus, SolverOptions};
use crate::DEFAULT_RANK_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Bfm,
    Pp,
    Es,
}

impl std::fmt::Display for Criterion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Criterion::Bfm => "BFM",
            Criterion::Pp => "PP",
            Criterion::Es => "ES",
        })
    }
}

/// Ordered list of at least two states of equal dimension.
#[derive(Clone, Debug)]
pub struct StateSet {
    states: Vec<DensityMatrix>,
    labels: Vec<String>,
}

impl StateSet {
    pub fn new(states: Vec<DensityMatrix>) -> Result<Self> {
        let labels = (1..=states.len()).map(|i| format!("rho{i}")).collect();
        Self::with_labels(states, labels)
    }

    pub fn with_labels(states: Vec<DensityMatrix>, labels: Vec<String>) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::TooFewStates(states.len()));
        }
        let d = states[0].dim();
        for s in &states {
            check_dims(d, s.dim())?;
        }
        assert_eq!(states.len(), labels.len(), "one label per state");
        Ok(Self { states, labels })
    }

    pub fn pair(a: DensityMatrix, b: DensityMatrix) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `Σⱼ ρⱼ`.
    pub fn sum(&self) -> HermitianOperator {
        self.states
            .iter()
            .fold(HermitianOperator::zeros(self.dim()), |acc, s| &acc + s.op())
    }

    /// Every state conjugated by the same unitary.
    pub fn conjugated(&self, u: &CMat) -> Result<Self> {
        let states = self.states.iter().map(|s| s.conjugate(u)).collect::<Result<_>>()?;
        Self::with_labels(states, self.labels.clone())
    }

    /// States reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let states = order.iter().map(|&i| self.states[i].clone()).collect();
        let labels = order.iter().map(|&i| self.labels[i].clone()).collect();
        Self::with_labels(states, labels)
    }

    /// A copy with one more state appended.
    pub fn with_state(&self, extra: DensityMatrix) -> Result<Self> {
        let mut states = self.states.clone();
        let mut labels = self.labels.clone();
        states.push(extra);
        labels.push(format!("rho{}", states.len()));
        Self::with_labels(states, labels)
    }
}

/// Solver bookkeeping attached to each report.
#[derive(Clone, Debug, Serialize)]
pub struct SolverSummary {
    pub status: SolveStatus,
    pub iterations: usize,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub tol: f64,
}

/// Outcome of one compatibility measure.
#[derive(Clone, Debug)]
pub struct CompatibilityReport {
    pub criterion: Criterion,
    /// Optimum clamped to `[0, ∞)`.
    pub value: f64,
    /// Optimum as returned by the solver.
    pub raw_value: f64,
    /// Dual objective of the certificate; an upper bound on `raw_value` up
    /// to the dual feasibility residual.
    pub dual_value: f64,
    /// `R` for BFM, `N` for PP, `λ` as a 1×1 operator for ES.
    pub primal_witness: HermitianOperator,
    /// `Mᵢ`, one per state, in the original basis.
    pub dual_certificate: Vec<HermitianOperator>,
    /// ES only: the multipliers `αⱼ`, indexed by the eigenvectors of
    /// `Σⱼ ρⱼ` spanning its support (ascending eigenvalue order).
    pub alphas: Vec<f64>,
    pub gap: f64,
    /// `1 − D(ρ₁, ρ₂)` for pairs under BFM.
    pub upper_bound_trace_distance: Option<f64>,
    /// Dimension of the subspace the program was solved on: the common
    /// support for BFM, `D` for PP, `rank Σⱼ ρⱼ` for ES.
    pub face_dim: usize,
    pub solver: SolverSummary,
}

fn summary(sol: &SdpSolution, tol: f64) -> SolverSummary {
    SolverSummary {
        status: sol.status,
        iterations: sol.iterations,
        primal_infeasibility: sol.primal_infeasibility,
        dual_infeasibility: sol.dual_infeasibility,
        tol,
    }
}

fn run(problem: &SdpProblem, tol: f64) -> Result<SdpSolution> {
    let opts = SolverOptions {
        tol,
        ..SolverOptions::default()
    };
    let sol = sdp::solve_with(problem, &opts)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver {
            status: sol.status,
            gap: sol.gap,
            iterations: sol.iterations,
        });
    }
    Ok(sol)
}

fn op(m: &CMat) -> HermitianOperator {
    HermitianOperator::from_hermitian(m.clone())
}

/// `maximize Tr R  subject to  R ≤ ρᵢ (all i), R ≥ 0`.
pub fn bfm_problem(s: &StateSet) -> SdpProblem {
    let d = s.dim();
    let k = s.len();
    let mut map = LinearMap::new(vec![d], vec![d; k]);
    for i in 0..k {
        map = map.copy(0, i, 1.0);
    }
    let bound = s.states().iter().map(|r| r.matrix().clone()).collect();
    SdpProblem::new(vec![identity(d)], bound, map).expect("BFM program is well formed")
}

/// `maximize Tr N  subject to  N ≤ ρᵢ (all i)`, `N = N₊ − N₋` free.
pub fn pp_problem(s: &StateSet) -> SdpProblem {
    let d = s.dim();
    let k = s.len();
    let mut map = LinearMap::new(vec![d, d], vec![d; k]);
    for i in 0..k {
        map = map.copy(0, i, 1.0).copy(1, i, -1.0);
    }
    let bound = s.states().iter().map(|r| r.matrix().clone()).collect();
    SdpProblem::new(vec![identity(d), -identity(d)], bound, map)
        .and_then(|p| p.with_free_pair(0, 1))
        .expect("PP program is well formed")
}

/// `maximize λ  subject to  λ S ≤ ρᵢ (all i), λ ≥ 0` with `S = Σⱼ ρⱼ`, one
/// scalar variable and no auxiliary multipliers.
pub fn es_direct_problem(s: &StateSet) -> SdpProblem {
    let d = s.dim();
    let k = s.len();
    let sum = s.sum().into_matrix();
    let mut map = LinearMap::new(vec![1], vec![d; k]);
    for i in 0..k {
        map = map.trace_product(0, i, identity(1), sum.clone());
    }
    let bound = s.states().iter().map(|r| r.matrix().clone()).collect();
    SdpProblem::new(vec![identity(1)], bound, map).expect("ES program is well formed")
}

/// Eigenbasis of `S = Σⱼ ρⱼ` restricted to its support.
#[derive(Clone, Debug)]
pub struct SupportFrame {
    /// `D × r` isometry onto `supp(S)`, eigenvectors of `S` as columns.
    pub basis: CMat,
    /// Eigenvalues of `S` on its support.
    pub spectrum: Vec<f64>,
}

impl SupportFrame {
    pub fn of(s: &StateSet, rank_tol: f64) -> Self {
        let sum = s.sum();
        let e = sum.eig();
        let threshold = rank_tol * e.max().max(0.0);
        let spectrum: Vec<f64> = e.values.iter().copied().filter(|&v| v > threshold).collect();
        let basis = e.columns_where(|v| v > threshold);
        Self { basis, spectrum }
    }

    pub fn rank(&self) -> usize {
        self.spectrum.len()
    }

    /// `V† H V`.
    pub fn restrict(&self, h: &CMat) -> CMat {
        self.basis.adjoint() * h * &self.basis
    }

    /// `V H V†`.
    pub fn extend(&self, h: &CMat) -> CMat {
        &self.basis * h * self.basis.adjoint()
    }
}

/// The ES program in the multiplier form used for its dual: variables
/// `λ, λ₁, …, λ_r ≥ 0` (1×1 blocks), constraints `λ − λⱼ ≤ 0` and
/// `diag(λ₁…λ_r)·S̃ ≤ ρ̃ᵢ`, written in the eigenbasis of `S` on its support
/// where `S̃` is diagonal. The dual then reads
/// `minimize Σᵢ Tr[ρ̃ᵢ Mᵢ]` subject to `Σⱼ αⱼ ≥ 1` and
/// `sⱼ (Σᵢ Mᵢ)ⱼⱼ ≥ αⱼ`.
pub fn es_problem(s: &StateSet, rank_tol: f64) -> (SdpProblem, SupportFrame) {
    let frame = SupportFrame::of(s, rank_tol);
    let r = frame.rank();
    let k = s.len();
    let one = identity(1);
    let vars = vec![1; r + 1];
    let mut cons = vec![1; r];
    cons.extend(std::iter::repeat_n(r, k));
    let mut map = LinearMap::new(vars, cons);
    for j in 0..r {
        map = map
            .trace_product(0, j, one.clone(), one.clone())
            .trace_product(1 + j, j, one.clone(), -one.clone());
        let mut e = CMat::zeros(r, r);
        e[(j, j)] = crate::qmat::c64(frame.spectrum[j], 0.0);
        for i in 0..k {
            map = map.trace_product(1 + j, r + i, one.clone(), e.clone());
        }
    }
    let mut objective = vec![CMat::zeros(1, 1); r + 1];
    objective[0] = one;
    let mut bound = vec![CMat::zeros(1, 1); r];
    for st in s.states() {
        bound.push(frame.restrict(st.matrix()));
    }
    let p = SdpProblem::new(objective, bound, map).expect("ES multiplier program is well formed");
    (p, frame)
}

/// States closer than this entrywise are treated as one state.
pub const IDENTICAL_TOL: f64 = 1e-14;

fn identical(s: &StateSet) -> bool {
    let first = s.states()[0].op();
    s.states().iter().all(|st| st.op().max_abs_diff(first) <= IDENTICAL_TOL)
}

/// Exact optimum for identical states under BFM and PP: `R = ρ` is feasible
/// with trace 1, and `M = (I, 0, …)` is a dual certificate with value 1.
fn identical_report(s: &StateSet, criterion: Criterion, tol: f64) -> CompatibilityReport {
    let d = s.dim();
    let mut certs = vec![HermitianOperator::zeros(d); s.len()];
    certs[0] = HermitianOperator::identity(d);
    CompatibilityReport {
        criterion,
        value: 1.0,
        raw_value: 1.0,
        dual_value: 1.0,
        primal_witness: s.states()[0].op().clone(),
        dual_certificate: certs,
        alphas: Vec::new(),
        gap: 0.0,
        upper_bound_trace_distance: (criterion == Criterion::Bfm && s.len() == 2).then_some(1.0),
        face_dim: d,
        solver: SolverSummary {
            status: SolveStatus::Optimal,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
            tol,
        },
    }
}

/// Subspaces used to restrict the BFM program.
#[derive(Clone, Debug)]
pub struct BfmFace {
    /// `D × r` basis of `∩ supp(ρᵢ)`.
    pub common: CMat,
    /// `D × rᵢ` basis of each `supp(ρᵢ)`.
    pub supports: Vec<CMat>,
}

/// The BFM program restricted to the face where it is strictly feasible.
///
/// Every feasible `R ≥ 0` lives on `V = ∩ supp(ρᵢ)`, and for such `R` the
/// constraint `R ≤ ρᵢ` only acts on `supp(ρᵢ)`. Writing `R = V R̃ V†` and
/// compressing constraint `i` to `Wᵢ† · Wᵢ` gives an equivalent program whose
/// right-hand sides `Wᵢ† ρᵢ Wᵢ` are positive definite, so both it and its
/// dual have interior points. Returns `None` when the supports do not
/// intersect.
pub fn bfm_reduced_problem(s: &StateSet, rank_tol: f64) -> Option<(SdpProblem, BfmFace)> {
    let common = supports_intersection_basis(s.states(), rank_tol).ok()?;
    let r = common.ncols();
    if r == 0 {
        return None;
    }
    let supports: Vec<CMat> = s
        .states()
        .iter()
        .map(|st| projector_above(st.op(), rank_tol).basis)
        .collect();
    let dims = supports.iter().map(|w| w.ncols()).collect();
    let mut map = LinearMap::new(vec![r], dims);
    let mut bound = Vec::with_capacity(s.len());
    for (i, (st, w)) in s.states().iter().zip(&supports).enumerate() {
        map = map.congruence(0, i, 1.0, w.adjoint() * &common);
        bound.push(w.adjoint() * st.matrix() * w);
    }
    let p = SdpProblem::new(vec![identity(r)], bound, map).expect("reduced BFM program is well formed");
    Some((p, BfmFace { common, supports }))
}

pub fn k_bfm(s: &StateSet, tol: f64) -> Result<CompatibilityReport> {
    k_bfm_with_rank_tol(s, tol, DEFAULT_RANK_TOL)
}

pub fn k_bfm_with_rank_tol(s: &StateSet, tol: f64, rank_tol: f64) -> Result<CompatibilityReport> {
    if identical(s) {
        return Ok(identical_report(s, Criterion::Bfm, tol));
    }
    let upper = if s.len() == 2 {
        Some(1.0 - trace_distance(&s.states()[0], &s.states()[1])?)
    } else {
        None
    };
    let Some((p, face)) = bfm_reduced_problem(s, rank_tol) else {
        return Ok(disjoint_report(s, rank_tol, upper, tol));
    };
    let sol = run(&p, tol)?;
    let witness = &face.common * &sol.primal[0] * face.common.adjoint();
    let (certs, dual_value) = lift_certificate(s, &face, &sol.dual, tol);
    Ok(CompatibilityReport {
        criterion: Criterion::Bfm,
        value: sol.primal_value.max(0.0),
        raw_value: sol.primal_value,
        dual_value,
        primal_witness: op(&witness),
        dual_certificate: certs,
        alphas: Vec::new(),
        gap: dual_value - sol.primal_value,
        upper_bound_trace_distance: upper,
        face_dim: face.common.ncols(),
        solver: summary(&sol, tol),
    })
}

/// Lifts the reduced multipliers to a certificate with `Σᵢ Mᵢ ≥ I` on the
/// whole space. On the common support `V` the sum is made to exceed `I` by a
/// margin `δ` through `δ VV†/k`, which costs at most `δ` in the bound. The
/// complement is covered by `t (I − Pᵢ)`, orthogonal to `ρᵢ`, with the
/// smallest `t` that makes the Schur complement of the `V` block
/// nonnegative. A small `δ` forces a large `t`, which amplifies the weight
/// of `ρᵢ` outside its truncated support and any roundoff there, so several
/// margins are tried and the one with the smallest worst-case excess
/// `δ + t Σᵢ (|Tr ρᵢ(I − Pᵢ)| + d ε)` is kept. The bound is returned summed
/// term by term, because `Tr ρᵢMᵢ` evaluated directly loses about `t ε`.
fn lift_certificate(s: &StateSet, face: &BfmFace, dual: &[CMat], tol: f64) -> (Vec<HermitianOperator>, f64) {
    let d = s.dim();
    let k = dual.len() as f64;
    let v = &face.common;
    let id = identity(d);
    let reduced: Vec<CMat> = face
        .supports
        .iter()
        .zip(dual)
        .map(|(w, m)| w * m * w.adjoint())
        .collect();
    let sum: CMat = reduced.iter().fold(CMat::zeros(d, d), |a, m| a + m);
    let on_face = op(&(v.adjoint() * (&sum - &id) * v)).min_eigenvalue();
    let vv = v * v.adjoint();
    let perp = op(&(&id - &vv)).eig().columns_where(|x| x > 0.5);
    let complements: Vec<CMat> = face.supports.iter().map(|w| &id - w * w.adjoint()).collect();
    let build = |delta: f64, t: f64| -> Vec<HermitianOperator> {
        reduced
            .iter()
            .zip(&complements)
            .map(|(m, c)| op(&(m + &vv * c64(delta / k, 0.0) + c * c64(t, 0.0))))
            .collect()
    };
    let states = s.states();
    // Tr ρᵢ(I − Pᵢ) is the sum of the discarded eigenvalues.
    let discarded: Vec<f64> = states
        .iter()
        .zip(&face.supports)
        .map(|(st, w)| st.op().eigenvalues()[..d - w.ncols()].iter().sum())
        .collect();
    let outside: f64 = discarded.iter().sum();
    let leak: f64 = discarded.iter().map(|x| x.abs() + d as f64 * f64::EPSILON).sum();
    let on_reduced: f64 = states.iter().zip(&reduced).map(|(st, m)| inner(st.matrix(), m)).sum();
    let on_common: f64 = states.iter().map(|st| inner(st.matrix(), &vv)).sum::<f64>() / k;
    let mut best: Option<(f64, f64, f64)> = None;
    for j in -6..7 {
        let delta = on_face.min(0.0).abs() + tol * 10f64.powi(j);
        let t = if perp.ncols() == 0 {
            0.0
        } else {
            let total = &sum + &vv * c64(delta, 0.0) - &id;
            let a = op(&(v.adjoint() * &total * v)).eig();
            let c = v.adjoint() * &total * &perp;
            let b = perp.adjoint() * &total * &perp;
            let q = op(&(perp.adjoint() * complements.iter().fold(CMat::zeros(d, d), |a, m| a + m) * &perp)).eig();
            let a_inv = a.map(|x| 1.0 / x);
            let q_half = q.map(|x| 1.0 / x.max(f64::MIN_POSITIVE).sqrt());
            let need = q_half.matrix() * (c.adjoint() * a_inv.matrix() * &c - b) * q_half.matrix();
            op(&need).max_eigenvalue().max(0.0) * (1.0 + 1e-9)
        };
        let cost = delta + t * leak;
        if best.as_ref().is_none_or(|(bc, _, _)| cost < *bc) {
            best = Some((cost, delta, t));
        }
    }
    let (_, delta, t) = best.expect("at least one margin is tried");
    (build(delta, t), on_reduced + delta * on_common + t * outside)
}

/// BFM value 0 for states without common support. `R = 0` is optimal and
/// `Mᵢ = (I − Pᵢ)/λ_min(Σⱼ (I − Pⱼ))` is a dual certificate: the sum is
/// positive definite exactly when the supports have no common vector, and
/// each `Mᵢ` lives on the null space of `ρᵢ`.
fn disjoint_report(s: &StateSet, rank_tol: f64, upper: Option<f64>, tol: f64) -> CompatibilityReport {
    let d = s.dim();
    let complements: Vec<HermitianOperator> = s
        .states()
        .iter()
        .map(|st| &HermitianOperator::identity(d) - &projector_above(st.op(), rank_tol).op)
        .collect();
    let total = complements.iter().fold(HermitianOperator::zeros(d), |acc, c| &acc + c);
    let scale = 1.0 / total.min_eigenvalue();
    let certs: Vec<HermitianOperator> = complements.iter().map(|c| c.scale(scale)).collect();
    let dual_value: f64 = s.states().iter().zip(&certs).map(|(st, m)| st.op().inner(m)).sum();
    CompatibilityReport {
        criterion: Criterion::Bfm,
        value: 0.0,
        raw_value: 0.0,
        dual_value,
        primal_witness: HermitianOperator::zeros(d),
        dual_certificate: certs,
        alphas: Vec::new(),
        gap: dual_value,
        upper_bound_trace_distance: upper,
        face_dim: 0,
        solver: SolverSummary {
            status: SolveStatus::Optimal,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
            tol,
        },
    }
}

pub fn k_pp(s: &StateSet, tol: f64) -> Result<CompatibilityReport> {
    if identical(s) {
        return Ok(identical_report(s, Criterion::Pp, tol));
    }
    let p = pp_problem(s);
    let sol = run(&p, tol)?;
    let n = &sol.primal[0] - &sol.primal[1];
    Ok(CompatibilityReport {
        criterion: Criterion::Pp,
        value: sol.primal_value.max(0.0),
        raw_value: sol.primal_value,
        dual_value: sol.dual_value,
        primal_witness: op(&n),
        dual_certificate: sol.dual.iter().map(op).collect(),
        alphas: Vec::new(),
        gap: sol.gap,
        upper_bound_trace_distance: None,
        face_dim: s.dim(),
        solver: summary(&sol, tol),
    })
}

pub fn k_es(s: &StateSet, tol: f64) -> Result<CompatibilityReport> {
    k_es_with_rank_tol(s, tol, DEFAULT_RANK_TOL)
}

/// ES measure solved on the support of `Σⱼ ρⱼ`. Directions outside that
/// support carry no constraint, since every `ρᵢ` is supported inside it.
pub fn k_es_with_rank_tol(s: &StateSet, tol: f64, rank_tol: f64) -> Result<CompatibilityReport> {
    let (p, frame) = es_problem(s, rank_tol);
    let r = frame.rank();
    if let Some(report) = es_zero_report(s, &frame, tol) {
        return Ok(report);
    }
    let sol = run(&p, tol)?;
    let lambda = sol.primal[0][(0, 0)].re;
    let alphas = (0..r).map(|j| sol.dual[j][(0, 0)].re).collect();
    let certs = (0..s.len()).map(|i| op(&frame.extend(&sol.dual[r + i]))).collect();
    Ok(CompatibilityReport {
        criterion: Criterion::Es,
        value: lambda.max(0.0),
        raw_value: lambda,
        dual_value: sol.dual_value,
        primal_witness: HermitianOperator::diag(&[lambda]),
        dual_certificate: certs,
        alphas,
        gap: sol.gap,
        upper_bound_trace_distance: None,
        face_dim: r,
        solver: summary(&sol, tol),
    })
}

/// ES value 0 when some state nearly vanishes on a direction inside
/// `supp(S)`. With `v` the lowest eigenvector of `ρ̃ⱼ`, `Mⱼ = vv†/(v†S̃v)`,
/// other `Mᵢ = 0` and `αₗ = sₗ|vₗ|²/(v†S̃v)` is dual feasible with value
/// `v†ρ̃ⱼv/(v†S̃v)`; the shortcut applies when that value is within `tol`.
/// The interior point method stalls on such programs, which have no strictly
/// feasible `λ > 0`.
fn es_zero_report(s: &StateSet, frame: &SupportFrame, tol: f64) -> Option<CompatibilityReport> {
    let r = frame.rank();
    if r == 0 {
        return None;
    }
    let (j, v, value) = s
        .states()
        .iter()
        .enumerate()
        .map(|(j, st)| {
            let e = op(&frame.restrict(st.matrix())).eig();
            let v = e.vectors.column(0).into_owned();
            let weight: f64 = (0..r).map(|l| frame.spectrum[l] * v[l].norm_sqr()).sum();
            (j, v, e.values[0].max(0.0) / weight)
        })
        .min_by(|a, b| a.2.total_cmp(&b.2))?;
    if value > tol {
        return None;
    }
    let weight: f64 = (0..r).map(|l| frame.spectrum[l] * v[l].norm_sqr()).sum();
    let alphas = (0..r).map(|l| frame.spectrum[l] * v[l].norm_sqr() / weight).collect();
    let mut certs = vec![HermitianOperator::zeros(s.dim()); s.len()];
    certs[j] = op(&frame.extend(&(&v * v.adjoint()).scale(1.0 / weight)));
    let dual_value = s.states()[j].op().inner(&certs[j]);
    Some(CompatibilityReport {
        criterion: Criterion::Es,
        value: 0.0,
        raw_value: 0.0,
        dual_value,
        primal_witness: HermitianOperator::diag(&[0.0]),
        dual_certificate: certs,
        alphas,
        gap: dual_value,
        upper_bound_trace_distance: None,
        face_dim: r,
        solver: SolverSummary {
            status: SolveStatus::Optimal,
            iterations: 0,
            primal_infeasibility: 0.0,
            dual_infeasibility: 0.0,
            tol,
        },
    })
}

pub fn measure(criterion: Criterion, s: &StateSet, tol: f64) -> Result<CompatibilityReport> {
    match criterion {
        Criterion::Bfm => k_bfm(s, tol),
        Criterion::Pp => k_pp(s, tol),
        Criterion::Es => k_es(s, tol),
    }
}

/// `1 − D(a, b)` together with the candidate `R = (a + b − |a − b|)/2`.
#[derive(Clone, Debug)]
pub struct PairBound {
    pub value: f64,
    /// The candidate is PSD, so it is optimal and the bound is the measure.
    pub attained: bool,
    pub candidate: HermitianOperator,
    pub candidate_min_eigenvalue: f64,
}

/// Tolerance for calling the candidate `R` positive semidefinite.
pub const CANDIDATE_PSD_TOL: f64 = 1e-10;

pub fn bfm_pair_upper_bound(a: &DensityMatrix, b: &DensityMatrix) -> Result<PairBound> {
    let value = 1.0 - trace_distance(a, b)?;
    let sum = a.op() + b.op();
    let diff = a.op() - b.op();
    let candidate = (&sum - &matrix_abs(&diff)).scale(0.5);
    let candidate_min_eigenvalue = candidate.min_eigenvalue();
    Ok(PairBound {
        value,
        attained: candidate_min_eigenvalue >= -CANDIDATE_PSD_TOL,
        candidate,
        candidate_min_eigenvalue,
    })
}

/// Classical overlap `Σ_d minᵢ pᵢ(d)` of pairwise commuting states in their
/// joint eigenbasis.
pub fn oracle_bfm_commuting(s: &StateSet) -> Result<f64> {
    let states = s.states();
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let norm = commutator_norm(states[i].matrix(), states[j].matrix());
            if norm > 1e-9 {
                return Err(Error::NotCommuting { norm });
            }
        }
    }
    let basis = joint_eigenbasis(states);
    let d = s.dim();
    let mut total = 0.0;
    for col in 0..d {
        let v = basis.column(col);
        let m = states
            .iter()
            .map(|st| (v.adjoint() * st.matrix() * v)[(0, 0)].re)
            .fold(f64::INFINITY, f64::min);
        total += m;
    }
    Ok(total)
}

/// Simultaneous diagonalization: refine the eigenspaces of each state in
/// turn by the next one.
fn joint_eigenbasis(states: &[DensityMatrix]) -> CMat {
    let d = states[0].dim();
    let mut groups: Vec<CMat> = vec![identity(d)];
    for st in states {
        let mut next = Vec::new();
        for g in groups {
            let restricted = op(&(g.adjoint() * st.matrix() * &g));
            let e = restricted.eig();
            let mut start = 0;
            while start < e.values.len() {
                let mut end = start + 1;
                while end < e.values.len() && (e.values[end] - e.values[start]).abs() <= 1e-9 {
                    end += 1;
                }
                let cols = e.vectors.columns(start, end - start).into_owned();
                next.push(&g * cols);
                start = end;
            }
        }
        groups = next;
    }
    let mut out = CMat::zeros(d, d);
    let mut at = 0;
    for g in groups {
        out.columns_mut(at, g.ncols()).copy_from(&g);
        at += g.ncols();
    }
    out
}

/// Two-outcome exclusion: `1 − D(a, b)`.
pub fn oracle_pp_pair(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    Ok(1.0 - trace_distance(a, b)?)
}

/// `minᵢ λ_min(S^{−1/2} ρᵢ S^{−1/2})` on `supp(S)`, or 0 when the supports
/// differ.
pub fn oracle_es(s: &StateSet) -> f64 {
    oracle_es_with_rank_tol(s, DEFAULT_RANK_TOL)
}

pub fn oracle_es_with_rank_tol(s: &StateSet, rank_tol: f64) -> f64 {
    let sum = s.sum();
    let rank_s = projector_above(&sum, rank_tol).rank;
    if s.states()
        .iter()
        .any(|st| projector_above(st.op(), rank_tol).rank != rank_s)
    {
        return 0.0;
    }
    let frame = SupportFrame::of(s, rank_tol);
    let mut t = frame.basis.clone();
    for (j, &v) in frame.spectrum.iter().enumerate() {
        let f = 1.0 / v.sqrt();
        for i in 0..t.nrows() {
            t[(i, j)] *= f;
        }
    }
    s.states()
        .iter()
        .map(|st| op(&(t.adjoint() * st.matrix() * &t)).min_eigenvalue())
        .fold(f64::INFINITY, f64::min)
        .max(0.0)
}

/// Nonempty intersection of supports.
pub fn is_compatible(s: &StateSet, rank_tol: f64) -> bool {
    supports_intersection_dim(s.states(), rank_tol)
        .map(|d| d > 0)
        .unwrap_or(false)
}
