//! Infeasible-start primal-dual interior point method (HKM direction with a
//! Mehrotra predictor-corrector) for [`SdpProblem`]s.
//!
//! The normal form is first rewritten in standard form
//!
//! ```text
//! minimize  Σ_b ⟨C_b, X_b⟩ + c_u·u   subject to  𝒜(X) + F u = b,  X_b ≥ 0
//! ```
//!
//! with one slack block per inequality constraint block, one equation per
//! real coordinate of each constraint block, and the free pairs collapsed to
//! free real coordinates `u`. Equality pairs get no slack. The resulting
//! iterates are mapped back to normal-form `(X, Y)` before reporting.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::{InfeasibilityRay, SdpProblem, SdpSolution, SolveStatus};
use crate::error::Result;
use crate::qmat::{c64, hermitian_part, inner, CMat, HermitianOperator};

/// Environment variable naming a file that receives one JSON line per
/// solver iteration.
pub const TRACE_ENV: &str = "QCOMPAT_SDP_TRACE";

const REFINE_STEPS: usize = 10;

const INIT: &str = "infeasible-start: X0 = S0 = I, y0 = 0, u0 = 0";

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Iterate dump; `None` falls back to [`TRACE_ENV`].
    pub trace_path: Option<PathBuf>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: crate::DEFAULT_TOL,
            max_iter: 200,
            trace_path: None,
        }
    }
}

pub fn solve(p: &SdpProblem, tol: f64, max_iter: usize) -> Result<SdpSolution> {
    solve_with(
        p,
        &SolverOptions {
            tol,
            max_iter,
            trace_path: None,
        },
    )
}

pub fn solve_with(p: &SdpProblem, opts: &SolverOptions) -> Result<SdpSolution> {
    p.validate()?;
    let sf = StandardForm::build(p);
    let trace_path = opts
        .trace_path
        .clone()
        .or_else(|| std::env::var_os(TRACE_ENV).map(PathBuf::from));
    let mut ipm = Ipm::new(&sf, trace_path);
    Ok(ipm.run(p, opts))
}

/// Orthonormal basis of the real space of `n×n` Hermitian matrices under
/// `Re Tr(XY)`.
fn herm_basis(n: usize) -> Vec<CMat> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in i..n {
            if i == j {
                let mut e = CMat::zeros(n, n);
                e[(i, i)] = c64(1.0, 0.0);
                out.push(e);
            } else {
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = c64(r, 0.0);
                e[(j, i)] = c64(r, 0.0);
                out.push(e);
                let mut e = CMat::zeros(n, n);
                e[(i, j)] = c64(0.0, r);
                e[(j, i)] = c64(0.0, -r);
                out.push(e);
            }
        }
    }
    out
}

fn from_coords(basis: &[CMat], n: usize, coords: &[f64]) -> CMat {
    let mut m = CMat::zeros(n, n);
    for (e, &v) in basis.iter().zip(coords) {
        if v != 0.0 {
            m += e.scale(v);
        }
    }
    m
}

struct FreeVar {
    pos: usize,
    neg: usize,
    offset: usize,
    dim: usize,
}

struct StandardForm {
    cone_dims: Vec<usize>,
    var_cone: Vec<Option<usize>>,
    slack_cone: Vec<Option<usize>>,
    free: Vec<FreeVar>,
    /// `(constraint block, basis index)` per equation.
    rows: Vec<(usize, usize)>,
    /// Sparse rows of `𝒜`: `(cone block, matrix)`.
    a: Vec<Vec<(usize, CMat)>>,
    /// For each cone block, `(row, position in a[row])`.
    rows_at: Vec<Vec<(usize, usize)>>,
    f: DMatrix<f64>,
    b: DVector<f64>,
    c: Vec<CMat>,
    cu: DVector<f64>,
    bases: Vec<Vec<CMat>>,
}

impl StandardForm {
    fn build(p: &SdpProblem) -> Self {
        let vd = p.variable_dims();
        let cd = p.constraint_dims();
        let free_second: Vec<usize> = p.free_pairs.iter().map(|&(_, n)| n).collect();
        let free_first: Vec<usize> = p.free_pairs.iter().map(|&(q, _)| q).collect();
        let eq_second: Vec<usize> = p.equality_pairs.iter().map(|&(_, n)| n).collect();
        let eq_first: Vec<usize> = p.equality_pairs.iter().map(|&(q, _)| q).collect();

        let mut cone_dims = Vec::new();
        let mut var_cone = vec![None; vd.len()];
        for (v, &n) in vd.iter().enumerate() {
            if !free_first.contains(&v) && !free_second.contains(&v) {
                var_cone[v] = Some(cone_dims.len());
                cone_dims.push(n);
            }
        }
        let mut slack_cone = vec![None; cd.len()];
        for (c, &n) in cd.iter().enumerate() {
            if !eq_first.contains(&c) && !eq_second.contains(&c) {
                slack_cone[c] = Some(cone_dims.len());
                cone_dims.push(n);
            }
        }
        let mut free = Vec::new();
        let mut nfree = 0;
        for &(pos, neg) in &p.free_pairs {
            free.push(FreeVar {
                pos,
                neg,
                offset: nfree,
                dim: vd[pos],
            });
            nfree += vd[pos] * vd[pos];
        }

        let max_dim = vd.iter().chain(cd.iter()).copied().max().unwrap_or(0);
        let bases: Vec<Vec<CMat>> = (0..=max_dim).map(herm_basis).collect();

        let adj = p.map.adjoint();
        let mut rows = Vec::new();
        let mut a = Vec::new();
        let mut fcols: Vec<Vec<f64>> = Vec::new();
        let mut b = Vec::new();
        for (c, &n) in cd.iter().enumerate() {
            if eq_second.contains(&c) {
                continue;
            }
            for (t, e) in bases[n].iter().enumerate() {
                let img = adj.apply_block(c, e);
                let mut entries = Vec::new();
                for (v, m) in img.iter().enumerate() {
                    if let Some(ci) = var_cone[v] {
                        if m.iter().any(|z| *z != Complex64::new(0.0, 0.0)) {
                            entries.push((ci, m.clone()));
                        }
                    }
                }
                if let Some(si) = slack_cone[c] {
                    entries.push((si, e.clone()));
                }
                let mut frow = vec![0.0; nfree];
                for fv in &free {
                    for (s, es) in bases[fv.dim].iter().enumerate() {
                        frow[fv.offset + s] = inner(&img[fv.pos], es);
                    }
                }
                rows.push((c, t));
                a.push(entries);
                fcols.push(frow);
                b.push(inner(e, &p.bound[c]));
            }
        }
        let m = rows.len();
        let f = DMatrix::from_fn(m, nfree, |i, j| fcols[i][j]);
        let mut rows_at = vec![Vec::new(); cone_dims.len()];
        for (i, entries) in a.iter().enumerate() {
            for (k, (ci, _)) in entries.iter().enumerate() {
                rows_at[*ci].push((i, k));
            }
        }
        let mut c: Vec<CMat> = cone_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (v, ci) in var_cone.iter().enumerate() {
            if let Some(ci) = ci {
                c[*ci] = -&p.objective[v];
            }
        }
        let mut cu = DVector::zeros(nfree);
        for fv in &free {
            for (s, es) in bases[fv.dim].iter().enumerate() {
                cu[fv.offset + s] = -inner(&p.objective[fv.pos], es);
            }
        }
        Self {
            cone_dims,
            var_cone,
            slack_cone,
            free,
            rows,
            a,
            rows_at,
            f,
            b: DVector::from_vec(b),
            c,
            cu,
            bases,
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn nfree(&self) -> usize {
        self.f.ncols()
    }

    fn a_op(&self, x: &[CMat]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.a
                .iter()
                .map(|entries| entries.iter().map(|(ci, m)| inner(m, &x[*ci])).sum::<f64>()),
        )
    }

    fn at_op(&self, y: &DVector<f64>) -> Vec<CMat> {
        let mut out: Vec<CMat> = self.cone_dims.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (i, entries) in self.a.iter().enumerate() {
            if y[i] == 0.0 {
                continue;
            }
            for (ci, m) in entries {
                out[*ci].zip_apply(m, |o, v| *o += v * y[i]);
            }
        }
        out
    }

    /// Normal-form primal blocks from cone iterate and free coordinates.
    fn primal_blocks(&self, p: &SdpProblem, x: &[CMat], u: &DVector<f64>) -> Vec<CMat> {
        let vd = p.variable_dims();
        let mut out: Vec<CMat> = vd.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (v, ci) in self.var_cone.iter().enumerate() {
            if let Some(ci) = ci {
                out[v] = hermitian_part(&x[*ci]);
            }
        }
        for fv in &self.free {
            let m = from_coords(
                &self.bases[fv.dim],
                fv.dim,
                &u.as_slice()[fv.offset..fv.offset + fv.dim * fv.dim],
            );
            let (pos, neg) = split_signs(&m);
            out[fv.pos] = pos;
            out[fv.neg] = neg;
        }
        out
    }

    /// Normal-form dual blocks. Slack blocks take the dual slack `S` (exactly
    /// PSD); equality pairs split the free multiplier into its signed parts.
    fn dual_blocks(&self, p: &SdpProblem, s: &[CMat], y: &DVector<f64>) -> Vec<CMat> {
        let cd = p.constraint_dims();
        let mut out: Vec<CMat> = cd.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (c, si) in self.slack_cone.iter().enumerate() {
            if let Some(si) = si {
                out[c] = hermitian_part(&s[*si]);
            }
        }
        for &(pc, nc) in &p.equality_pairs {
            let n = cd[pc];
            let mut m = CMat::zeros(n, n);
            for (i, &(c, t)) in self.rows.iter().enumerate() {
                if c == pc {
                    m -= self.bases[n][t].scale(y[i]);
                }
            }
            let (pos, neg) = split_signs(&m);
            out[pc] = pos;
            out[nc] = neg;
        }
        out
    }

    /// Normal-form dual blocks for a raw multiplier direction (used for rays).
    fn dual_from_multiplier(&self, p: &SdpProblem, y: &DVector<f64>) -> Vec<CMat> {
        let cd = p.constraint_dims();
        let mut full: Vec<CMat> = cd.iter().map(|&n| CMat::zeros(n, n)).collect();
        for (i, &(c, t)) in self.rows.iter().enumerate() {
            full[c] -= self.bases[cd[c]][t].scale(y[i]);
        }
        let mut out = full.clone();
        for &(pc, nc) in &p.equality_pairs {
            let (pos, neg) = split_signs(&full[pc]);
            out[pc] = pos;
            out[nc] = neg;
        }
        out
    }
}

fn split_signs(m: &CMat) -> (CMat, CMat) {
    let e = HermitianOperator::from_hermitian(m.clone()).eig();
    let pos = e.map(|v| v.max(0.0)).into_matrix();
    let neg = e.map(|v| (-v).max(0.0)).into_matrix();
    (pos, neg)
}

fn sym(m: &CMat) -> CMat {
    hermitian_part(m)
}

fn dot_blocks(x: &[CMat], y: &[CMat]) -> f64 {
    x.iter().zip(y).map(|(a, b)| inner(a, b)).sum()
}

fn norm_blocks(x: &[CMat]) -> f64 {
    x.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

/// Largest `α` with `X + α dX ≥ 0` (infinite if `dX ≥ 0`), or `None` if `X`
/// is not positive definite.
fn max_step(x: &CMat, dx: &CMat) -> Option<f64> {
    let n = x.nrows();
    if n == 1 {
        let (xv, dv) = (x[(0, 0)].re, dx[(0, 0)].re);
        if xv <= 0.0 {
            return None;
        }
        return Some(if dv >= 0.0 { f64::INFINITY } else { -xv / dv });
    }
    if n == 2 {
        return max_step_2x2(x, dx);
    }
    let l = Cholesky::new(x.clone())?.unpack();
    let t = l.solve_lower_triangular(dx)?;
    let w = l.solve_lower_triangular(&t.adjoint())?.adjoint();
    let lmin = min_eigenvalue(&w);
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

/// Closed form for 2×2 blocks: the smallest root `λ` of `det(dX − λX) = 0`
/// gives the step `−1/λ`.
fn max_step_2x2(x: &CMat, dx: &CMat) -> Option<f64> {
    let (a, c, b) = (x[(0, 0)].re, x[(1, 1)].re, (x[(0, 1)] + x[(1, 0)].conj()) * 0.5);
    let (p, r, q) = (dx[(0, 0)].re, dx[(1, 1)].re, (dx[(0, 1)] + dx[(1, 0)].conj()) * 0.5);
    let det_x = a * c - b.norm_sqr();
    if a <= 0.0 || det_x <= 0.0 {
        return None;
    }
    // det(dX − λX) = det_x λ² − t λ + det_dx.
    let t = p * c + r * a - 2.0 * (q * b.conj()).re;
    let det_dx = p * r - q.norm_sqr();
    let disc = (t * t - 4.0 * det_x * det_dx).max(0.0).sqrt();
    // Stable roots: the larger-magnitude one first.
    let big = 0.5 * (t + t.signum() * disc);
    let lmin = if big == 0.0 {
        0.0
    } else {
        let r1 = big / det_x;
        let r2 = det_dx / big;
        r1.min(r2)
    };
    Some(if lmin >= 0.0 { f64::INFINITY } else { -1.0 / lmin })
}

/// Smallest eigenvalue of the Hermitian part, without eigenvectors.
fn min_eigenvalue(m: &CMat) -> f64 {
    if m.nrows() == 2 {
        let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
        let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
        return 0.5 * (a + d) - (0.25 * (a - d).powi(2) + b.norm_sqr()).sqrt();
    }
    hermitian_part(m).symmetric_eigenvalues().min()
}

fn inverse_pd(s: &CMat) -> Option<CMat> {
    if s.nrows() == 1 {
        let v = s[(0, 0)].re;
        return (v > 0.0).then(|| CMat::from_element(1, 1, c64(1.0 / v, 0.0)));
    }
    if s.nrows() == 2 {
        let (a, c, b) = (s[(0, 0)].re, s[(1, 1)].re, (s[(0, 1)] + s[(1, 0)].conj()) * 0.5);
        let det = a * c - b.norm_sqr();
        if a <= 0.0 || det <= 0.0 {
            return None;
        }
        let k = 1.0 / det;
        return Some(CMat::from_row_slice(
            2,
            2,
            &[c64(c * k, 0.0), -b * k, -b.conj() * k, c64(a * k, 0.0)],
        ));
    }
    Cholesky::new(s.clone()).map(|c| hermitian_part(&c.inverse()))
}

enum Factor {
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(l) => l.solve(rhs),
        }
    }
}

struct Direction {
    dx: Vec<CMat>,
    ds: Vec<CMat>,
    dy: DVector<f64>,
    du: DVector<f64>,
}

struct Ipm<'a> {
    sf: &'a StandardForm,
    x: Vec<CMat>,
    s: Vec<CMat>,
    y: DVector<f64>,
    u: DVector<f64>,
    trace: Option<std::io::BufWriter<std::fs::File>>,
    /// Best iterate meeting the reporting tolerance, with its score.
    best: Option<(f64, Iterate)>,
}

#[derive(Clone)]
struct Iterate {
    x: Vec<CMat>,
    s: Vec<CMat>,
    y: DVector<f64>,
    u: DVector<f64>,
}

struct Residuals {
    rp: DVector<f64>,
    rd: Vec<CMat>,
    rf: DVector<f64>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    mu: f64,
}

impl<'a> Ipm<'a> {
    fn new(sf: &'a StandardForm, trace_path: Option<PathBuf>) -> Self {
        let x = sf.cone_dims.iter().map(|&n| CMat::identity(n, n)).collect();
        let s = sf.cone_dims.iter().map(|&n| CMat::identity(n, n)).collect();
        let trace = trace_path.and_then(|path| {
            OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .ok()
                .map(std::io::BufWriter::new)
        });
        Self {
            sf,
            x,
            s,
            y: DVector::zeros(sf.m()),
            u: DVector::zeros(sf.nfree()),
            trace,
            best: None,
        }
    }

    fn barrier_degree(&self) -> f64 {
        self.sf.cone_dims.iter().sum::<usize>().max(1) as f64
    }

    fn residuals(&self) -> Residuals {
        let sf = self.sf;
        let rp = &sf.b - sf.a_op(&self.x) - &sf.f * &self.u;
        let aty = sf.at_op(&self.y);
        let rd: Vec<CMat> = (0..sf.cone_dims.len())
            .map(|b| &sf.c[b] - &aty[b] - &self.s[b])
            .collect();
        let rf = &sf.cu - sf.f.transpose() * &self.y;
        let pobj = dot_blocks(&sf.c, &self.x) + sf.cu.dot(&self.u);
        let dobj = sf.b.dot(&self.y);
        let pinf = rp.norm() / (1.0 + sf.b.norm());
        let dinf = (norm_blocks(&rd) + rf.norm()) / (1.0 + norm_blocks(&sf.c) + sf.cu.norm());
        let mu = dot_blocks(&self.x, &self.s) / self.barrier_degree();
        Residuals {
            rp,
            rd,
            rf,
            pobj,
            dobj,
            pinf,
            dinf,
            mu,
        }
    }

    fn schur(&self, sinv: &[CMat]) -> Option<Factor> {
        let sf = self.sf;
        let m = sf.m();
        let mut mm = DMatrix::<f64>::zeros(m, m);
        for (b, rows) in sf.rows_at.iter().enumerate() {
            for &(j, kj) in rows {
                let g = &self.x[b] * &sf.a[j][kj].1 * &sinv[b];
                for &(i, ki) in rows {
                    if i <= j {
                        mm[(i, j)] += inner(&sf.a[i][ki].1, &g);
                    }
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                mm[(j, i)] = mm[(i, j)];
            }
        }
        let nf = sf.nfree();
        if nf == 0 {
            if let Some(c) = Cholesky::new(mm.clone()) {
                return Some(Factor::Chol(c));
            }
            // Dependent rows make M singular near the optimum; a small ridge
            // keeps the step an inexact but usable Newton direction.
            let scale = mm.diagonal().amax().max(f64::MIN_POSITIVE);
            for ridge in [1e-14, 1e-12, 1e-10] {
                let mut reg = mm.clone();
                for i in 0..m {
                    reg[(i, i)] += ridge * scale;
                }
                if let Some(c) = Cholesky::new(reg) {
                    return Some(Factor::Chol(c));
                }
            }
            return Some(Factor::Lu(mm.lu()));
        }
        let mut k = DMatrix::<f64>::zeros(m + nf, m + nf);
        k.view_mut((0, 0), (m, m)).copy_from(&mm);
        k.view_mut((0, m), (m, nf)).copy_from(&sf.f);
        k.view_mut((m, 0), (nf, m)).copy_from(&sf.f.transpose());
        Some(Factor::Lu(k.lu()))
    }

    fn direction(
        &self,
        factor: &Factor,
        sinv: &[CMat],
        r: &Residuals,
        sigma_mu: f64,
        corr: Option<&[CMat]>,
    ) -> Option<Direction> {
        let sf = self.sf;
        let nb = sf.cone_dims.len();
        let g: Vec<CMat> = (0..nb)
            .map(|b| {
                let n = sf.cone_dims[b];
                let mut t = sinv[b].scale(sigma_mu) - &self.x[b] - &self.x[b] * &r.rd[b] * &sinv[b];
                if let Some(c) = corr {
                    t -= &c[b] * &sinv[b];
                }
                debug_assert_eq!(t.nrows(), n);
                sym(&t)
            })
            .collect();
        let m = sf.m();
        let nf = sf.nfree();
        let solve = |top: &DVector<f64>, bottom: &DVector<f64>| -> Option<(DVector<f64>, DVector<f64>)> {
            if nf == 0 {
                return Some((factor.solve(top)?, DVector::zeros(0)));
            }
            let mut rhs = DVector::zeros(m + nf);
            rhs.rows_mut(0, m).copy_from(top);
            rhs.rows_mut(m, nf).copy_from(bottom);
            let sol = factor.solve(&rhs)?;
            Some((sol.rows(0, m).into_owned(), sol.rows(m, nf).into_owned()))
        };
        let dx_of = |atdy: &[CMat]| -> Vec<CMat> {
            (0..nb)
                .map(|b| &g[b] + sym(&(&self.x[b] * &atdy[b] * &sinv[b])))
                .collect()
        };
        let (mut dy, mut du) = solve(&(&r.rp - sf.a_op(&g)), &r.rf)?;
        let mut atdy = sf.at_op(&dy);
        let mut dx = dx_of(&atdy);
        // The Schur matrix is badly conditioned near the optimum; refine
        // against the unassembled operators so that 𝒜(dX) + F du = r_p holds.
        let mut last = f64::INFINITY;
        for _ in 0..REFINE_STEPS {
            let e1 = &r.rp - sf.a_op(&dx) - &sf.f * &du;
            let e2 = &r.rf - sf.f.transpose() * &dy;
            let err = e1.norm() + e2.norm();
            if err <= f64::EPSILON * (1.0 + r.rp.norm()) || err >= 0.5 * last {
                break;
            }
            last = err;
            let (cy, cu) = solve(&e1, &e2)?;
            dy += cy;
            du += cu;
            atdy = sf.at_op(&dy);
            dx = dx_of(&atdy);
        }
        if dy.iter().chain(du.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        let ds: Vec<CMat> = (0..nb).map(|b| &r.rd[b] - &atdy[b]).collect();
        Some(Direction { dx, ds, dy, du })
    }

    fn step_lengths(&self, d: &Direction) -> Option<(f64, f64)> {
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for b in 0..self.x.len() {
            ap = ap.min(max_step(&self.x[b], &d.dx[b])?);
            ad = ad.min(max_step(&self.s[b], &d.ds[b])?);
        }
        Some((ap, ad))
    }

    fn log(&mut self, iter: usize, r: &Residuals, gap: f64, ap: f64, ad: f64, sigma: f64) {
        if let Some(w) = self.trace.as_mut() {
            let line = serde_json::json!({
                "iter": iter,
                "primal_obj": -r.pobj,
                "dual_obj": -r.dobj,
                "gap": gap,
                "primal_infeas": r.pinf,
                "dual_infeas": r.dinf,
                "mu": r.mu,
                "step_primal": ap,
                "step_dual": ad,
                "sigma": sigma,
            });
            let _ = writeln!(w, "{line}");
        }
    }

    fn finish(
        &mut self,
        p: &SdpProblem,
        status: SolveStatus,
        iterations: usize,
        ray: Option<InfeasibilityRay>,
    ) -> SdpSolution {
        if let Some(w) = self.trace.as_mut() {
            let _ = w.flush();
        }
        let primal = self.sf.primal_blocks(p, &self.x, &self.u);
        let dual = self.sf.dual_blocks(p, &self.s, &self.y);
        let primal_value = p.primal_objective(&primal);
        let dual_value = p.dual_objective(&dual);
        let (pi, pm) = p.primal_residuals(&primal);
        let (di, dm) = p.dual_residuals(&dual);
        SdpSolution {
            primal,
            dual,
            primal_value,
            dual_value,
            gap: dual_value - primal_value,
            status,
            iterations,
            primal_infeasibility: pi,
            primal_min_eigenvalue: pm,
            dual_infeasibility: di,
            dual_min_eigenvalue: dm,
            ray,
            init: INIT,
        }
    }

    /// Stops with half the gap allowance, leaving headroom for the
    /// normal-form check.
    fn converged(&self, p: &SdpProblem, r: &Residuals, tol: f64) -> bool {
        self.within(p, r, tol, 0.5)
    }

    fn within(&self, p: &SdpProblem, r: &Residuals, tol: f64, gap_share: f64) -> bool {
        if r.pinf > tol || r.dinf > tol {
            return false;
        }
        let gap = r.pobj - r.dobj;
        if gap.abs() > gap_share * tol * r.pobj.abs().max(1.0) {
            return false;
        }
        // Confirm on the normal-form pair that will be reported.
        let primal = self.sf.primal_blocks(p, &self.x, &self.u);
        let dual = self.sf.dual_blocks(p, &self.s, &self.y);
        let a = p.primal_objective(&primal);
        let b = p.dual_objective(&dual);
        (b - a).abs() <= tol * a.abs().max(1.0)
    }

    fn check_infeasible(&self, p: &SdpProblem, r: &Residuals) -> Option<InfeasibilityRay> {
        let sf = self.sf;
        let big = 1e8;
        let scale_c = 1.0 + norm_blocks(&sf.c) + sf.cu.norm();
        if r.dobj > big * scale_c {
            let yhat = &self.y / r.dobj;
            let aty = sf.at_op(&yhat);
            let cone_ok = aty.iter().all(|m| m.nrows() == 0 || super::max_eig(m) <= 1e-6);
            let free_ok = (sf.f.transpose() * &yhat).norm() <= 1e-6;
            if cone_ok && free_ok {
                return Some(InfeasibilityRay::Dual(sf.dual_from_multiplier(p, &yhat)));
            }
        }
        let scale_b = 1.0 + sf.b.norm();
        if -r.pobj > big * scale_b {
            let t = -r.pobj;
            let xhat: Vec<CMat> = self.x.iter().map(|m| m.scale(1.0 / t)).collect();
            let uhat = &self.u / t;
            let res = (sf.a_op(&xhat) + &sf.f * &uhat).norm();
            if res <= 1e-6 {
                // Slack blocks are dropped: the ray lives on the variable blocks.
                return Some(InfeasibilityRay::Primal(sf.primal_blocks(p, &xhat, &uhat)));
            }
        }
        None
    }

    /// Remembers the current iterate if it already meets the full
    /// reporting tolerance and beats the previous such iterate.
    fn remember(&mut self, p: &SdpProblem, r: &Residuals, tol: f64) {
        if !self.within(p, r, tol, 1.0) {
            return;
        }
        let score = r.pinf.max(r.dinf).max((r.pobj - r.dobj).abs() / r.pobj.abs().max(1.0));
        if self.best.as_ref().is_none_or(|(b, _)| score < *b) {
            let it = Iterate {
                x: self.x.clone(),
                s: self.s.clone(),
                y: self.y.clone(),
                u: self.u.clone(),
            };
            self.best = Some((score, it));
        }
    }

    /// Progress has stopped: fall back to the best acceptable iterate.
    fn stall(&mut self, p: &SdpProblem, iter: usize) -> SdpSolution {
        match self.best.take() {
            Some((_, it)) => {
                self.x = it.x;
                self.s = it.s;
                self.y = it.y;
                self.u = it.u;
                self.finish(p, SolveStatus::Optimal, iter, None)
            }
            None => self.finish(p, SolveStatus::NumericalLimit, iter, None),
        }
    }

    fn run(&mut self, p: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
        let tol = opts.tol;
        let n = self.barrier_degree();
        for iter in 0..opts.max_iter {
            let r = self.residuals();
            if self.converged(p, &r, tol) {
                self.log(iter, &r, r.pobj - r.dobj, 0.0, 0.0, 0.0);
                return self.finish(p, SolveStatus::Optimal, iter, None);
            }
            self.remember(p, &r, tol);
            if let Some(ray) = self.check_infeasible(p, &r) {
                self.log(iter, &r, r.pobj - r.dobj, 0.0, 0.0, 0.0);
                return self.finish(p, SolveStatus::Infeasible, iter, Some(ray));
            }
            let Some(sinv) = self.s.iter().map(inverse_pd).collect::<Option<Vec<_>>>() else {
                return self.stall(p, iter);
            };
            let Some(factor) = self.schur(&sinv) else {
                return self.stall(p, iter);
            };

            // Predictor.
            let Some(pred) = self.direction(&factor, &sinv, &r, 0.0, None) else {
                return self.stall(p, iter);
            };
            let Some((ap, ad)) = self.step_lengths(&pred) else {
                return self.stall(p, iter);
            };
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut mu_aff = 0.0;
            for b in 0..self.x.len() {
                let xa = &self.x[b] + pred.dx[b].scale(ap);
                let sa = &self.s[b] + pred.ds[b].scale(ad);
                mu_aff += inner(&xa, &sa);
            }
            mu_aff /= n;
            let expon = (3.0 * ap.min(ad).powi(2)).max(1.0);
            let sigma = if r.mu > 0.0 {
                (mu_aff.max(0.0) / r.mu).powf(expon).min(1.0)
            } else {
                0.0
            };

            // Corrector.
            let corr: Vec<CMat> = (0..self.x.len()).map(|b| &pred.dx[b] * &pred.ds[b]).collect();
            let Some(dir) = self.direction(&factor, &sinv, &r, sigma * r.mu, Some(&corr)) else {
                return self.stall(p, iter);
            };
            let Some((mp, md)) = self.step_lengths(&dir) else {
                return self.stall(p, iter);
            };
            let gamma = 0.9 + 0.09 * ap.min(ad);
            let step_p = (gamma * mp).min(1.0);
            let step_d = (gamma * md).min(1.0);
            self.log(iter, &r, r.pobj - r.dobj, step_p, step_d, sigma);
            if step_p < 1e-14 && step_d < 1e-14 {
                return self.stall(p, iter);
            }
            for b in 0..self.x.len() {
                self.x[b] = sym(&(&self.x[b] + dir.dx[b].scale(step_p)));
                self.s[b] = sym(&(&self.s[b] + dir.ds[b].scale(step_d)));
            }
            self.u += dir.du.scale(step_p);
            self.y += dir.dy.scale(step_d);
        }
        let r = self.residuals();
        if self.converged(p, &r, tol) {
            return self.finish(p, SolveStatus::Optimal, opts.max_iter, None);
        }
        self.remember(p, &r, tol);
        self.stall(p, opts.max_iter)
    }
}
