//! Maximum-entropy state assignment from expectation values.
//!
//! The entropy maximizer under `Tr[Oᵢ ρ] = oᵢ` has the Gibbs form
//! `ρ = exp(Σᵢ λᵢ Oᵢ) / Z`. The multipliers are found by Newton's method on
//! the convex dual `log Z(λ) − λ·o`, whose Hessian is the Kubo–Mori
//! covariance of the observables.
//!
//! Consistency of the constraints is settled first by a feasibility program,
//! so contradictory data is reported as [`Error::Infeasible`] rather than as
//! a diverging iteration. Constraints that can only be met by a singular
//! state have no Gibbs form; they end in [`Error::BoundaryState`].

use crate::error::{Error, Result};
use crate::qmat::{c64, identity, CMat, DensityMatrix, HermitianOperator};
use crate::sdp::{self, LinearMap, SdpProblem, SolveStatus};

/// `Tr[observable · ρ] = value`.
#[derive(Clone, Debug)]
pub struct ExpectationConstraint {
    pub observable: HermitianOperator,
    pub value: f64,
}

impl ExpectationConstraint {
    pub fn new(observable: HermitianOperator, value: f64) -> Self {
        Self { observable, value }
    }

    /// `|Tr[O ρ] − o|`.
    pub fn residual(&self, rho: &DensityMatrix) -> f64 {
        (self.observable.inner(rho.op()) - self.value).abs()
    }
}

#[derive(Clone, Debug)]
pub struct MaxEntResult {
    pub state: DensityMatrix,
    /// One multiplier per input constraint, such that
    /// `state ∝ exp(Σᵢ λᵢ Oᵢ)`. When observables are linearly dependent the
    /// minimum-norm choice is returned.
    pub multipliers: Vec<f64>,
    /// Von Neumann entropy in nats.
    pub entropy: f64,
    /// `Tr[Oᵢ ρ] − oᵢ` per constraint.
    pub residuals: Vec<f64>,
    /// `‖log ρ − Σᵢ λᵢ Oᵢ − cI‖_F` with the best scalar `c`; infinite when
    /// `ρ` is numerically singular.
    pub gibbs_residual: f64,
    pub iterations: usize,
    /// Set when the maximizer sits on the boundary of the state space.
    pub boundary: bool,
}

impl MaxEntResult {
    pub fn multiplier_norm(&self) -> f64 {
        self.multipliers.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Multiplier norm beyond which an unfinished solve is taken to diverge.
pub const BOUNDARY_MULTIPLIER_NORM: f64 = 1e3;
/// Smallest eigenvalue below which `log ρ` is not trusted.
pub const BOUNDARY_EIGENVALUE: f64 = 1e-13;
/// Feasibility violation above which constraints are inconsistent.
pub const FEASIBILITY_TOL: f64 = 1e-7;

const GRADIENT_TOL: f64 = 1e-13;
const MAX_NEWTON: usize = 500;

/// `−Σ pᵢ ln pᵢ` over the spectrum, with `0 ln 0 = 0`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of(&rho.op().eigenvalues())
}

fn entropy_of(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum::<f64>()
        .max(0.0)
}

/// Maximum-entropy state under the union of two parties' constraints.
pub fn pool_classical(a: &[ExpectationConstraint], b: &[ExpectationConstraint], dim: usize) -> Result<MaxEntResult> {
    let union: Vec<_> = a.iter().chain(b).cloned().collect();
    maxent_estimate(&union, dim)
}

pub fn maxent_estimate(constraints: &[ExpectationConstraint], dim: usize) -> Result<MaxEntResult> {
    for c in constraints {
        crate::qmat::check_dims(dim, c.observable.dim())?;
        let e = c.observable.eig();
        let outside = (e.min() - c.value).max(c.value - e.max());
        if outside > 1e-9 {
            return Err(Error::Infeasible { violation: outside });
        }
    }
    if constraints.is_empty() {
        return finish(constraints, DensityMatrix::maximally_mixed(dim), vec![], 0, false);
    }
    let violation = feasibility_violation(constraints, dim)?;
    if violation > FEASIBILITY_TOL {
        return Err(Error::Infeasible { violation });
    }

    let reduced = Reduced::new(constraints, dim);
    if reduced.basis.is_empty() {
        let lambdas = vec![0.0; constraints.len()];
        return finish(constraints, DensityMatrix::maximally_mixed(dim), lambdas, 0, false);
    }
    let mut mu = vec![0.0; reduced.basis.len()];
    let mut point = reduced.evaluate(&mu);
    let mut iterations = 0;
    while iterations < MAX_NEWTON {
        if point.grad_norm() <= GRADIENT_TOL {
            break;
        }
        iterations += 1;
        let step = newton_step(&point.hessian(&reduced), &point.grad);
        let slope: f64 = step.iter().zip(&point.grad).map(|(s, g)| s * g).sum();
        let mut t = 1.0;
        let next = loop {
            let trial: Vec<f64> = mu.iter().zip(&step).map(|(m, s)| m + t * s).collect();
            let cand = reduced.evaluate(&trial);
            // Near the optimum the decrease drops below the resolution of the
            // objective, so a smaller gradient also counts as progress.
            if cand.dual <= point.dual + 1e-4 * t * slope || cand.grad_norm() < point.grad_norm() || t < 1e-12 {
                break (trial, cand);
            }
            t *= 0.5;
        };
        if next.1.dual >= point.dual && next.1.grad_norm() >= point.grad_norm() {
            // No progress left in floating point.
            break;
        }
        mu = next.0;
        point = next.1;
    }
    let lambdas = reduced.multipliers(&mu);
    let state = point.state();
    let converged = point.grad_norm() <= 1e-9;
    // Large multipliers alone are not divergence: nearly dependent
    // observables need them at interior points too. They signal a boundary
    // only when Newton could not finish.
    let diverged = !converged && lambdas.iter().map(|l| l * l).sum::<f64>().sqrt() > BOUNDARY_MULTIPLIER_NORM;
    let boundary = diverged || point.probs.iter().fold(f64::INFINITY, |m, &p| m.min(p)) < BOUNDARY_EIGENVALUE;
    if !boundary && !converged {
        return Err(Error::Solver {
            status: SolveStatus::NumericalLimit,
            gap: point.grad_norm(),
            iterations,
        });
    }
    finish(constraints, state, lambdas, iterations, boundary)
}

fn finish(
    constraints: &[ExpectationConstraint],
    state: DensityMatrix,
    multipliers: Vec<f64>,
    iterations: usize,
    boundary: bool,
) -> Result<MaxEntResult> {
    let residuals = constraints
        .iter()
        .map(|c| c.observable.inner(state.op()) - c.value)
        .collect();
    let gibbs_residual = if boundary {
        f64::INFINITY
    } else {
        gibbs_residual(&state, constraints, &multipliers)
    };
    let result = MaxEntResult {
        entropy: von_neumann_entropy(&state),
        state,
        multipliers,
        residuals,
        gibbs_residual,
        iterations,
        boundary,
    };
    if boundary {
        Err(Error::BoundaryState(Box::new(result)))
    } else {
        Ok(result)
    }
}

fn gibbs_residual(state: &DensityMatrix, constraints: &[ExpectationConstraint], lambdas: &[f64]) -> f64 {
    let Ok(log) = crate::qmat::matrix_log(state.op()) else {
        return f64::INFINITY;
    };
    let d = state.dim();
    let mut m = log.into_matrix();
    for (c, &l) in constraints.iter().zip(lambdas) {
        m -= c.observable.matrix() * c64(l, 0.0);
    }
    let shift = m.trace() / c64(d as f64, 0.0);
    m -= identity(d) * shift;
    m.norm()
}

/// Least total slack `Σ |Tr[Oᵢ ρ] − oᵢ|` over density matrices `ρ`.
pub fn feasibility_violation(constraints: &[ExpectationConstraint], dim: usize) -> Result<f64> {
    let m = constraints.len();
    let one = identity(1);
    let mut vars = vec![dim];
    vars.extend(std::iter::repeat_n(1, 2 * m));
    let mut map = LinearMap::new(vars, vec![1; 2 + 2 * m]);
    map = map
        .trace_product(0, 0, identity(dim), one.clone())
        .trace_product(0, 1, identity(dim), -one.clone());
    let mut bound = vec![one.clone(), -one.clone()];
    for (i, c) in constraints.iter().enumerate() {
        let (p, q) = (1 + i, 1 + m + i);
        let (row, neg) = (2 + 2 * i, 3 + 2 * i);
        for (block, sign) in [(row, 1.0), (neg, -1.0)] {
            map = map
                .trace_product(0, block, c.observable.matrix().clone(), one.scale(sign))
                .trace_product(p, block, one.clone(), one.scale(-sign))
                .trace_product(q, block, one.clone(), one.scale(sign));
        }
        bound.push(one.scale(c.value));
        bound.push(one.scale(-c.value));
    }
    let mut objective = vec![CMat::zeros(dim, dim)];
    objective.extend(std::iter::repeat_n(-one.clone(), 2 * m));
    let mut problem = SdpProblem::new(objective, bound, map)?;
    for i in 0..=m {
        problem = problem.with_equality_pair(2 * i, 2 * i + 1)?;
    }
    let sol = sdp::solve(&problem, 1e-10, 200)?;
    if sol.status != SolveStatus::Optimal {
        return Err(Error::Solver {
            status: sol.status,
            gap: sol.gap,
            iterations: sol.iterations,
        });
    }
    Ok((-sol.primal_value).max(0.0))
}

/// Constraints rewritten over an orthonormal basis of the span of their
/// traceless parts.
struct Reduced {
    dim: usize,
    basis: Vec<CMat>,
    targets: Vec<f64>,
    /// Maps reduced multipliers back: `λ = back · μ`.
    back: Vec<Vec<f64>>,
}

impl Reduced {
    fn new(constraints: &[ExpectationConstraint], dim: usize) -> Self {
        let m = constraints.len();
        let eye = identity(dim);
        let traceless: Vec<(CMat, f64)> = constraints
            .iter()
            .map(|c| {
                let t = c.observable.trace() / dim as f64;
                (c.observable.matrix() - &eye * c64(t, 0.0), c.value - t)
            })
            .collect();
        let gram = nalgebra::DMatrix::from_fn(m, m, |i, j| crate::qmat::inner(&traceless[i].0, &traceless[j].0));
        let eig = nalgebra::SymmetricEigen::new(gram);
        let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
        let mut basis = Vec::new();
        let mut targets = Vec::new();
        let mut back = vec![Vec::new(); m];
        for k in 0..m {
            let g = eig.eigenvalues[k];
            if g <= 1e-12 * top.max(1e-300) || g <= 0.0 {
                continue;
            }
            let s = g.sqrt();
            let mut f = CMat::zeros(dim, dim);
            let mut target = 0.0;
            for i in 0..m {
                let u = eig.eigenvectors[(i, k)] / s;
                f += &traceless[i].0 * c64(u, 0.0);
                target += u * traceless[i].1;
                back[i].push(u);
            }
            basis.push(f);
            targets.push(target);
        }
        Self {
            dim,
            basis,
            targets,
            back,
        }
    }

    fn multipliers(&self, mu: &[f64]) -> Vec<f64> {
        self.back
            .iter()
            .map(|row| row.iter().zip(mu).map(|(u, m)| u * m).sum())
            .collect()
    }

    fn evaluate(&self, mu: &[f64]) -> Point {
        let mut h = CMat::zeros(self.dim, self.dim);
        for (f, &m) in self.basis.iter().zip(mu) {
            h += f * c64(m, 0.0);
        }
        let e = HermitianOperator::from_hermitian(crate::qmat::hermitian_part(&h)).eig();
        let top = e.max();
        let w: Vec<f64> = e.values.iter().map(|&x| (x - top).exp()).collect();
        let z: f64 = w.iter().sum();
        let probs: Vec<f64> = w.iter().map(|x| x / z).collect();
        let rotated: Vec<CMat> = self
            .basis
            .iter()
            .map(|f| e.vectors.adjoint() * f * &e.vectors)
            .collect();
        let grad: Vec<f64> = rotated
            .iter()
            .zip(&self.targets)
            .map(|(f, t)| (0..self.dim).map(|a| probs[a] * f[(a, a)].re).sum::<f64>() - t)
            .collect();
        let dual = top + z.ln() - mu.iter().zip(&self.targets).map(|(m, t)| m * t).sum::<f64>();
        Point {
            values: e.values.clone(),
            vectors: e.vectors,
            probs,
            rotated,
            grad,
            dual,
        }
    }
}

struct Point {
    values: Vec<f64>,
    vectors: CMat,
    probs: Vec<f64>,
    rotated: Vec<CMat>,
    grad: Vec<f64>,
    dual: f64,
}

impl Point {
    fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    fn state(&self) -> DensityMatrix {
        let n = self.probs.len();
        let mut m = CMat::zeros(n, n);
        for (a, &p) in self.probs.iter().enumerate() {
            let v = self.vectors.column(a);
            m += (v * v.adjoint()) * c64(p, 0.0);
        }
        DensityMatrix::from_matrix(crate::qmat::hermitian_part(&m)).expect("Gibbs state is a valid density matrix")
    }

    /// Kubo–Mori covariance: the Hessian of `log Z` in the reduced
    /// coordinates.
    fn hessian(&self, r: &Reduced) -> nalgebra::DMatrix<f64> {
        let n = self.probs.len();
        let mut kernel = nalgebra::DMatrix::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                let delta = self.values[a] - self.values[b];
                kernel[(a, b)] = if delta.abs() < 1e-12 {
                    self.probs[b]
                } else {
                    self.probs[b] * delta.exp_m1() / delta
                };
            }
        }
        let k = r.basis.len();
        let mean: Vec<f64> = (0..k).map(|i| self.grad[i] + r.targets[i]).collect();
        nalgebra::DMatrix::from_fn(k, k, |i, j| {
            let (fi, fj) = (&self.rotated[i], &self.rotated[j]);
            let mut s = 0.0;
            for a in 0..n {
                for b in 0..n {
                    s += kernel[(a, b)] * (fi[(a, b)] * fj[(b, a)]).re;
                }
            }
            s - mean[i] * mean[j]
        })
    }
}

fn newton_step(hessian: &nalgebra::DMatrix<f64>, grad: &[f64]) -> Vec<f64> {
    let g = nalgebra::DVector::from_column_slice(grad);
    let mut h = hessian.clone();
    let scale = h.diagonal().amax().max(1e-300);
    let mut ridge = 0.0;
    loop {
        if let Some(ch) = h.clone().cholesky() {
            return (-ch.solve(&g)).iter().copied().collect();
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
        h = hessian + nalgebra::DMatrix::identity(grad.len(), grad.len()) * ridge;
    }
}
