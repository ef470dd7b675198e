//! Block-structured semidefinite programs.
//!
//! A problem `{A, B, Φ}` is stored in the normal form
//!
//! ```text
//! maximize  Tr[A X]   subject to  Φ(X) ≤ B,  X ≥ 0
//! ```
//!
//! whose dual is `minimize Tr[B Y] subject to Φ*(Y) ≥ A, Y ≥ 0`, with the
//! adjoint defined by `Tr[Y Φ(X)] = Tr[X Φ*(Y)]`. Both `X` and the constraint
//! space are block diagonal; a 1×1 block is a nonnegative scalar.
//!
//! Equality constraints are written as a pair of constraint blocks with
//! opposite signs, and a free Hermitian variable as a pair of variable blocks
//! `X₊ − X₋`. Both pairings are declared on the problem so that [`dualize`]
//! and the solver can treat them as equality constraints and free variables.

mod solver;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qmat::{hermitian_part, inner, CMat, HermitianOperator};
use crate::random;

pub use solver::{solve, solve_with, SolverOptions, TRACE_ENV};

/// One term of a Hermiticity-preserving linear map.
#[derive(Clone, Debug)]
pub enum MapTerm {
    /// `coeff · K X K†` from block `input` into block `output`; `K` is
    /// `dim(output) × dim(input)`.
    Congruence {
        input: usize,
        output: usize,
        coeff: f64,
        k: CMat,
    },
    /// `Tr(W X) · C`. With a 1×1 input this places a scalar variable into a
    /// matrix block; with a 1×1 output it selects a weighted trace.
    TraceProduct {
        input: usize,
        output: usize,
        weight: CMat,
        image: CMat,
    },
}

impl MapTerm {
    fn input(&self) -> usize {
        match self {
            MapTerm::Congruence { input, .. } | MapTerm::TraceProduct { input, .. } => *input,
        }
    }

    fn output(&self) -> usize {
        match self {
            MapTerm::Congruence { output, .. } | MapTerm::TraceProduct { output, .. } => *output,
        }
    }

    fn adjoint(&self) -> MapTerm {
        match self {
            MapTerm::Congruence {
                input,
                output,
                coeff,
                k,
            } => MapTerm::Congruence {
                input: *output,
                output: *input,
                coeff: *coeff,
                k: k.adjoint(),
            },
            MapTerm::TraceProduct {
                input,
                output,
                weight,
                image,
            } => MapTerm::TraceProduct {
                input: *output,
                output: *input,
                weight: image.clone(),
                image: weight.clone(),
            },
        }
    }

    fn negated(&self) -> MapTerm {
        match self {
            MapTerm::Congruence {
                input,
                output,
                coeff,
                k,
            } => MapTerm::Congruence {
                input: *input,
                output: *output,
                coeff: -coeff,
                k: k.clone(),
            },
            MapTerm::TraceProduct {
                input,
                output,
                weight,
                image,
            } => MapTerm::TraceProduct {
                input: *input,
                output: *output,
                weight: weight.clone(),
                image: -image,
            },
        }
    }
}

/// Linear map between block-diagonal Hermitian spaces.
#[derive(Clone, Debug)]
pub struct LinearMap {
    pub input_dims: Vec<usize>,
    pub output_dims: Vec<usize>,
    pub terms: Vec<MapTerm>,
}

impl LinearMap {
    pub fn new(input_dims: Vec<usize>, output_dims: Vec<usize>) -> Self {
        Self {
            input_dims,
            output_dims,
            terms: Vec::new(),
        }
    }

    /// Adds `coeff · K X_input K†` to `output`.
    pub fn congruence(mut self, input: usize, output: usize, coeff: f64, k: CMat) -> Self {
        self.terms.push(MapTerm::Congruence {
            input,
            output,
            coeff,
            k,
        });
        self
    }

    /// Adds `coeff · X_input` to `output` (equal dimensions).
    pub fn copy(self, input: usize, output: usize, coeff: f64) -> Self {
        let n = self.input_dims[input];
        self.congruence(input, output, coeff, CMat::identity(n, n))
    }

    /// Adds `Tr(W X_input) · C` to `output`.
    pub fn trace_product(mut self, input: usize, output: usize, weight: CMat, image: CMat) -> Self {
        self.terms.push(MapTerm::TraceProduct {
            input,
            output,
            weight,
            image,
        });
        self
    }

    pub fn apply(&self, x: &[CMat]) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.output_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for t in &self.terms {
            self.apply_term(t, &x[t.input()], &mut out[t.output()]);
        }
        out
    }

    /// Image of a single input block (all other blocks zero).
    pub fn apply_block(&self, block: usize, x: &CMat) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.output_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for t in self.terms.iter().filter(|t| t.input() == block) {
            self.apply_term(t, x, &mut out[t.output()]);
        }
        out
    }

    fn apply_term(&self, t: &MapTerm, x: &CMat, out: &mut CMat) {
        match t {
            MapTerm::Congruence { coeff, k, .. } => {
                *out += (k * x * k.adjoint()).scale(*coeff);
            }
            MapTerm::TraceProduct { weight, image, .. } => {
                *out += image.scale(inner(weight, x));
            }
        }
    }

    /// The adjoint map `Φ*`.
    pub fn adjoint(&self) -> LinearMap {
        LinearMap {
            input_dims: self.output_dims.clone(),
            output_dims: self.input_dims.clone(),
            terms: self.terms.iter().map(MapTerm::adjoint).collect(),
        }
    }

    pub fn negated(&self) -> LinearMap {
        LinearMap {
            input_dims: self.input_dims.clone(),
            output_dims: self.output_dims.clone(),
            terms: self.terms.iter().map(MapTerm::negated).collect(),
        }
    }
}

/// Block-diagonal inner product `Σ_b Re Tr(X_b Y_b)`.
pub fn block_inner(x: &[CMat], y: &[CMat]) -> f64 {
    x.iter().zip(y).map(|(a, b)| inner(a, b)).sum()
}

/// Semidefinite program in normal form.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    /// `A`, one Hermitian block per variable block.
    pub objective: Vec<CMat>,
    /// `B`, one Hermitian block per constraint block.
    pub bound: Vec<CMat>,
    pub map: LinearMap,
    /// Variable block pairs `(p, n)` standing for a free variable `X_p − X_n`.
    pub free_pairs: Vec<(usize, usize)>,
    /// Constraint block pairs `(p, n)` with `Φ_n = −Φ_p`, `B_n = −B_p`,
    /// i.e. the equality `Φ_p(X) = B_p`.
    pub equality_pairs: Vec<(usize, usize)>,
    /// Multiplies the optimum of this program to give the value of the
    /// program it was derived from: `+1` for an original problem, `−1` after
    /// one [`dualize`] (a minimization rewritten as a maximization).
    pub value_sign: f64,
}

/// How the solver left a problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalLimit,
}

/// Evidence that a problem has no optimum.
#[derive(Clone, Debug)]
pub enum InfeasibilityRay {
    /// `Y ≥ 0` with `Φ*(Y) ≥ 0` and `Tr[BY] < 0`: the primal is infeasible.
    Dual(Vec<CMat>),
    /// `X ≥ 0` with `Φ(X) ≤ 0` and `Tr[AX] > 0`: the primal is unbounded.
    Primal(Vec<CMat>),
}

/// Solved primal/dual pair with residuals measured in the normal form.
#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub primal: Vec<CMat>,
    pub dual: Vec<CMat>,
    /// `α = Tr[A X]`.
    pub primal_value: f64,
    /// `β = Tr[B Y]`.
    pub dual_value: f64,
    /// `β − α`.
    pub gap: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    /// `max(0, λ_max(Φ(X) − B))`.
    pub primal_infeasibility: f64,
    /// `λ_min(X)` over all blocks.
    pub primal_min_eigenvalue: f64,
    /// `max(0, λ_max(A − Φ*(Y)))`.
    pub dual_infeasibility: f64,
    /// `λ_min(Y)` over all blocks.
    pub dual_min_eigenvalue: f64,
    pub ray: Option<InfeasibilityRay>,
    /// Initialization strategy used.
    pub init: &'static str,
}

impl SdpSolution {
    /// Optimum expressed for the problem the solved program was derived from.
    pub fn value(&self, problem: &SdpProblem) -> f64 {
        problem.value_sign * self.primal_value
    }
}

const VALIDATION_TOL: f64 = 1e-10;

impl SdpProblem {
    pub fn new(objective: Vec<CMat>, bound: Vec<CMat>, map: LinearMap) -> Result<Self> {
        let p = Self {
            objective,
            bound,
            map,
            free_pairs: Vec::new(),
            equality_pairs: Vec::new(),
            value_sign: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_free_pair(mut self, p: usize, n: usize) -> Result<Self> {
        self.free_pairs.push((p, n));
        self.validate()?;
        Ok(self)
    }

    pub fn with_equality_pair(mut self, p: usize, n: usize) -> Result<Self> {
        self.equality_pairs.push((p, n));
        self.validate()?;
        Ok(self)
    }

    pub fn variable_dims(&self) -> &[usize] {
        &self.map.input_dims
    }

    pub fn constraint_dims(&self) -> &[usize] {
        &self.map.output_dims
    }

    /// Structural and numerical checks: block sizes agree, `A` and `B` are
    /// Hermitian, `Φ` maps a random Hermitian probe to Hermitian output, and
    /// declared pairs really are sign-flipped copies of each other.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        let vd = &self.map.input_dims;
        let cd = &self.map.output_dims;
        if self.objective.len() != vd.len() {
            return bad(format!(
                "{} objective blocks for {} variable blocks",
                self.objective.len(),
                vd.len()
            ));
        }
        if self.bound.len() != cd.len() {
            return bad(format!(
                "{} bound blocks for {} constraint blocks",
                self.bound.len(),
                cd.len()
            ));
        }
        for (i, (a, &n)) in self.objective.iter().zip(vd).enumerate() {
            if a.shape() != (n, n) {
                return bad(format!("objective block {i} is not {n}x{n}"));
            }
            if !is_hermitian(a) {
                return bad(format!("objective block {i} is not Hermitian"));
            }
        }
        for (i, (b, &n)) in self.bound.iter().zip(cd).enumerate() {
            if b.shape() != (n, n) {
                return bad(format!("bound block {i} is not {n}x{n}"));
            }
            if !is_hermitian(b) {
                return bad(format!("bound block {i} is not Hermitian"));
            }
        }
        for (ti, t) in self.map.terms.iter().enumerate() {
            let (i, o) = (t.input(), t.output());
            if i >= vd.len() || o >= cd.len() {
                return bad(format!("map term {ti} refers to a missing block"));
            }
            let ok = match t {
                MapTerm::Congruence { k, coeff, .. } => k.shape() == (cd[o], vd[i]) && coeff.is_finite(),
                MapTerm::TraceProduct { weight, image, .. } => {
                    weight.shape() == (vd[i], vd[i])
                        && image.shape() == (cd[o], cd[o])
                        && is_hermitian(weight)
                        && is_hermitian(image)
                }
            };
            if !ok {
                return bad(format!("map term {ti} has inconsistent shape or data"));
            }
        }

        let mut rng = random::seeded(0x5eed);
        let probe: Vec<CMat> = vd.iter().map(|&n| probe_hermitian(n, &mut rng)).collect();
        for (o, out) in self.map.apply(&probe).iter().enumerate() {
            let dev = (out - out.adjoint()).norm();
            if dev > VALIDATION_TOL * (1.0 + out.norm()) {
                return bad(format!("map output block {o} is not Hermitian (deviation {dev:.3e})"));
            }
        }

        let adj = self.map.adjoint();
        for &(p, n) in &self.free_pairs {
            if p >= vd.len() || n >= vd.len() || p == n || vd[p] != vd[n] {
                return bad(format!("free pair ({p}, {n}) is invalid"));
            }
            if (&self.objective[p] + &self.objective[n]).norm() > VALIDATION_TOL {
                return bad(format!("free pair ({p}, {n}): objective blocks are not opposite"));
            }
            let h = probe_hermitian(vd[p], &mut rng);
            let sum: f64 = self
                .map
                .apply_block(p, &h)
                .iter()
                .zip(self.map.apply_block(n, &h))
                .map(|(a, b)| (a + b).norm())
                .sum();
            if sum > VALIDATION_TOL * (1.0 + h.norm()) {
                return bad(format!("free pair ({p}, {n}): map images are not opposite"));
            }
        }
        for &(p, n) in &self.equality_pairs {
            if p >= cd.len() || n >= cd.len() || p == n || cd[p] != cd[n] {
                return bad(format!("equality pair ({p}, {n}) is invalid"));
            }
            if (&self.bound[p] + &self.bound[n]).norm() > VALIDATION_TOL {
                return bad(format!("equality pair ({p}, {n}): bound blocks are not opposite"));
            }
            let h = probe_hermitian(cd[p], &mut rng);
            let sum: f64 = adj
                .apply_block(p, &h)
                .iter()
                .zip(adj.apply_block(n, &h))
                .map(|(a, b)| (a + b).norm())
                .sum();
            if sum > VALIDATION_TOL * (1.0 + h.norm()) {
                return bad(format!("equality pair ({p}, {n}): constraint rows are not opposite"));
            }
        }
        Ok(())
    }

    /// `Tr[A X]`.
    pub fn primal_objective(&self, x: &[CMat]) -> f64 {
        block_inner(&self.objective, x)
    }

    /// `Tr[B Y]`.
    pub fn dual_objective(&self, y: &[CMat]) -> f64 {
        block_inner(&self.bound, y)
    }

    /// `(max(0, λ_max(Φ(X) − B)), λ_min(X))`.
    pub fn primal_residuals(&self, x: &[CMat]) -> (f64, f64) {
        let phi = self.map.apply(x);
        let viol = phi
            .iter()
            .zip(&self.bound)
            .map(|(p, b)| max_eig(&(p - b)))
            .fold(0.0, f64::max);
        (viol, blocks_min_eig(x))
    }

    /// `(max(0, λ_max(A − Φ*(Y))), λ_min(Y))`.
    pub fn dual_residuals(&self, y: &[CMat]) -> (f64, f64) {
        let phi = self.map.adjoint().apply(y);
        let viol = phi
            .iter()
            .zip(&self.objective)
            .map(|(p, a)| max_eig(&(a - p)))
            .fold(0.0, f64::max);
        (viol, blocks_min_eig(y))
    }
}

/// The dual program, rewritten in the same maximization normal form:
/// `maximize Tr[(−B) Y] subject to (−Φ*)(Y) ≤ −A, Y ≥ 0`.
///
/// The returned problem has `value_sign` flipped, so its optimum times
/// `value_sign` is the dual optimum `min Tr[BY]`. Equality pairs of the
/// original become free pairs of the dual and vice versa, so dualizing twice
/// gives back the original problem.
pub fn dualize(p: &SdpProblem) -> SdpProblem {
    SdpProblem {
        objective: p.bound.iter().map(|b| -b).collect(),
        bound: p.objective.iter().map(|a| -a).collect(),
        map: p.map.adjoint().negated(),
        free_pairs: p.equality_pairs.clone(),
        equality_pairs: p.free_pairs.clone(),
        value_sign: -p.value_sign,
    }
}

fn is_hermitian(m: &CMat) -> bool {
    (m - m.adjoint()).norm() <= VALIDATION_TOL * (1.0 + m.norm())
}

fn probe_hermitian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMat {
    let g = random::ginibre(n, n, rng);
    hermitian_part(&g)
}

pub(crate) fn max_eig(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    HermitianOperator::from_hermitian(m.clone()).max_eigenvalue()
}

pub(crate) fn blocks_min_eig(x: &[CMat]) -> f64 {
    x.iter()
        .filter(|b| b.nrows() > 0)
        .map(|b| HermitianOperator::from_hermitian(b.clone()).min_eigenvalue())
        .fold(f64::INFINITY, f64::min)
}
