//! Dense complex Hermitian linear algebra.
//!
//! Everything else in the crate is built on [`HermitianOperator`] and
//! [`DensityMatrix`]. Matrices are small (dimension a handful up to a few
//! dozen) and stored densely as `nalgebra` matrices of `Complex64`.

use std::cmp::Ordering;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
pub use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;

/// Relative anti-Hermitian deviation accepted (and symmetrized away) on input.
pub const HERMITIAN_TOL: f64 = 1e-8;

/// Tolerance on the trace and on negative eigenvalues of a density matrix.
pub const STATE_TOL: f64 = 1e-10;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(M + M†)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    let n = m.nrows();
    CMat::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

/// Real part of `Tr(AB)`, the real inner product on Hermitian matrices.
pub fn inner(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

pub fn trace_re(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
}

/// `|ψ⟩⟨ψ|` for an (unnormalized) vector.
pub fn outer(psi: &[Complex64]) -> CMat {
    let n = psi.len();
    CMat::from_fn(n, n, |i, j| psi[i] * psi[j].conj())
}

/// Hermitian operator with a real spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMat,
}

/// Eigendecomposition `H = V diag(values) V†` with ascending eigenvalues.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns.
    pub vectors: CMat,
}

impl Eigen {
    /// `V f(Λ) V†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> HermitianOperator {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let fv = f(v);
            for i in 0..n {
                scaled[(i, j)] *= fv;
            }
        }
        HermitianOperator::from_hermitian(&scaled * self.vectors.adjoint())
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Eigenvectors whose eigenvalue satisfies `keep`, as columns.
    pub fn columns_where(&self, keep: impl Fn(f64) -> bool) -> CMat {
        let idx: Vec<usize> = (0..self.values.len()).filter(|&j| keep(self.values[j])).collect();
        let n = self.vectors.nrows();
        CMat::from_fn(n, idx.len(), |i, j| self.vectors[(i, idx[j])])
    }
}

impl HermitianOperator {
    /// Validates and symmetrizes a matrix. Deviations up to
    /// [`HERMITIAN_TOL`]`·‖H‖` are absorbed by taking `(H + H†)/2`.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonHermitian {
                deviation: f64::NAN,
                limit: 0.0,
            });
        }
        let deviation = (&m - m.adjoint()).norm() * 0.5;
        let limit = HERMITIAN_TOL * m.norm();
        if deviation > limit {
            return Err(Error::NonHermitian { deviation, limit });
        }
        Ok(Self::from_hermitian(m))
    }

    /// Symmetrizes without checking; for matrices Hermitian by construction.
    pub(crate) fn from_hermitian(m: CMat) -> Self {
        let m = hermitian_part(&m);
        Self { m }
    }

    pub fn from_real(d: usize, entries: &[f64]) -> Result<Self> {
        assert_eq!(entries.len(), d * d);
        Self::new(CMat::from_fn(d, d, |i, j| c64(entries[i * d + j], 0.0)))
    }

    pub fn diag(values: &[f64]) -> Self {
        let d = values.len();
        Self {
            m: CMat::from_fn(d, d, |i, j| if i == j { c64(values[i], 0.0) } else { c64(0.0, 0.0) }),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self { m: identity(d) }
    }

    pub fn zeros(d: usize) -> Self {
        Self { m: CMat::zeros(d, d) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.m
    }

    pub fn into_matrix(self) -> CMat {
        self.m
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.m)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.m.norm()
    }

    pub fn eig(&self) -> Eigen {
        eig_hermitian(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.eig().values
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eig().max()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { m: self.m.scale(s) }
    }

    /// `U H U†`.
    pub fn conjugate(&self, u: &CMat) -> Self {
        Self::from_hermitian(u * &self.m * u.adjoint())
    }

    /// Real inner product `Re Tr(HK)`.
    pub fn inner(&self, other: &Self) -> f64 {
        inner(&self.m, &other.m)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.m - &other.m).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator { m: &self.m + &rhs.m }
    }
}

impl Sub for &HermitianOperator {
    type Output = HermitianOperator;
    fn sub(self, rhs: Self) -> HermitianOperator {
        HermitianOperator { m: &self.m - &rhs.m }
    }
}

impl Neg for &HermitianOperator {
    type Output = HermitianOperator;
    fn neg(self) -> HermitianOperator {
        HermitianOperator { m: -&self.m }
    }
}

impl Mul<f64> for &HermitianOperator {
    type Output = HermitianOperator;
    fn mul(self, rhs: f64) -> HermitianOperator {
        self.scale(rhs)
    }
}

/// Hermitian eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector is phase-fixed so that its largest-magnitude component
/// (first one on ties) is real and positive, and exact eigenvalue ties are
/// ordered lexicographically by eigenvector, which makes the output a
/// deterministic function of the input.
pub fn eig_hermitian(h: &HermitianOperator) -> Eigen {
    let n = h.dim();
    if n == 0 {
        return Eigen {
            values: vec![],
            vectors: CMat::zeros(0, 0),
        };
    }
    let se = SymmetricEigen::new(h.m.clone());
    let mut cols: Vec<(f64, Vec<Complex64>)> = (0..n)
        .map(|j| {
            let mut v: Vec<Complex64> = se.eigenvectors.column(j).iter().copied().collect();
            fix_phase(&mut v);
            (se.eigenvalues[j], v)
        })
        .collect();
    cols.sort_by(|a, b| match a.0.total_cmp(&b.0) {
        Ordering::Equal => lex_cmp(&a.1, &b.1),
        o => o,
    });
    let values = cols.iter().map(|c| c.0).collect();
    let vectors = CMat::from_fn(n, n, |i, j| cols[j].1[i]);
    Eigen { values, vectors }
}

fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_norm * (1.0 + 1e-12) {
            best = i;
            best_norm = a;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / best_norm;
        for z in v.iter_mut() {
            *z *= phase;
        }
        v[best] = c64(v[best].re, 0.0);
    }
}

fn lex_cmp(a: &[Complex64], b: &[Complex64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// `|H|`, the matrix absolute value.
pub fn matrix_abs(h: &HermitianOperator) -> HermitianOperator {
    h.eig().map(f64::abs)
}

pub fn matrix_exp(h: &HermitianOperator) -> HermitianOperator {
    h.eig().map(f64::exp)
}

pub fn matrix_log(h: &HermitianOperator) -> Result<HermitianOperator> {
    let e = h.eig();
    if e.min() <= 0.0 {
        return Err(Error::SingularLog {
            min_eigenvalue: e.min(),
        });
    }
    Ok(e.map(f64::ln))
}

/// Frobenius norm of the commutator `AB − BA`.
pub fn commutator_norm(a: &CMat, b: &CMat) -> f64 {
    (a * b - b * a).norm()
}

/// Density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: HermitianOperator,
}

impl DensityMatrix {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let trace = op.trace();
        if (trace - 1.0).abs() > STATE_TOL {
            return Err(Error::NotUnitTrace { trace });
        }
        let min_eigenvalue = op.min_eigenvalue();
        if min_eigenvalue < -STATE_TOL {
            return Err(Error::NotPsd { min_eigenvalue });
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMat) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    /// Normalizes a positive operator by its trace.
    pub fn normalized(op: &HermitianOperator) -> Result<Self> {
        let t = op.trace();
        Self::new(op.scale(1.0 / t))
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            op: HermitianOperator::identity(d).scale(1.0 / d as f64),
        }
    }

    /// Pure state `|ψ⟩⟨ψ|`; `psi` is normalized first.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v: Vec<Complex64> = psi.iter().map(|z| z / n).collect();
        Self::from_matrix(outer(&v))
    }

    pub fn diag(p: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::diag(p))
    }

    /// Qubit state `(I + r·σ)/2`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let m = (identity(2) + pauli_x().scale(r[0]) + pauli_y().scale(r[1]) + pauli_z().scale(r[2])).scale(0.5);
        Self::from_matrix(m)
    }

    /// Bloch vector of a qubit state.
    pub fn bloch(&self) -> Option<[f64; 3]> {
        if self.dim() != 2 {
            return None;
        }
        let m = self.matrix();
        Some([inner(m, &pauli_x()), inner(m, &pauli_y()), inner(m, &pauli_z())])
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMat {
        self.op.matrix()
    }

    pub fn conjugate(&self, u: &CMat) -> Result<Self> {
        Self::new(self.op.conjugate(u))
    }
}

impl AsRef<HermitianOperator> for DensityMatrix {
    fn as_ref(&self) -> &HermitianOperator {
        &self.op
    }
}

/// Half the trace norm of `a − b`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let diff = a.op() - b.op();
    let d: f64 = diff.eigenvalues().iter().map(|v| v.abs()).sum::<f64>() * 0.5;
    Ok(d.clamp(0.0, 1.0))
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Orthogonal projector onto the support of a state.
#[derive(Clone, Debug)]
pub struct SupportProjector {
    pub op: HermitianOperator,
    pub rank: usize,
    /// Orthonormal basis of the support, as columns.
    pub basis: CMat,
}

/// Projector onto the eigenvectors of `rho` whose eigenvalue exceeds
/// `rank_tol · λ_max`.
pub fn support_projector(rho: &DensityMatrix, rank_tol: f64) -> SupportProjector {
    projector_above(rho.op(), rank_tol)
}

pub(crate) fn projector_above(h: &HermitianOperator, rank_tol: f64) -> SupportProjector {
    let e = h.eig();
    let threshold = rank_tol * e.max().max(0.0);
    let basis = e.columns_where(|v| v > threshold);
    let rank = basis.ncols();
    let op = HermitianOperator::from_hermitian(&basis * basis.adjoint());
    SupportProjector { op, rank, basis }
}

/// Orthonormal basis (columns) of the numerical null space of `rho`.
pub fn null_basis(rho: &DensityMatrix, rank_tol: f64) -> CMat {
    let e = rho.op().eig();
    let threshold = rank_tol * e.max().max(0.0);
    e.columns_where(|v| v <= threshold)
}

/// Dimension of `∩ supp(ρᵢ)`, computed as `D − dim span{null(ρᵢ)}`.
pub fn supports_intersection_dim(states: &[DensityMatrix], rank_tol: f64) -> Result<usize> {
    Ok(supports_intersection_basis(states, rank_tol)?.ncols())
}

/// Orthonormal basis (columns) of `∩ supp(ρᵢ)`: the orthogonal complement
/// of the span of all null spaces.
pub fn supports_intersection_basis(states: &[DensityMatrix], rank_tol: f64) -> Result<CMat> {
    let Some(first) = states.first() else {
        return Ok(CMat::zeros(0, 0));
    };
    let d = first.dim();
    for s in states {
        check_dims(d, s.dim())?;
    }
    let nulls: Vec<CMat> = states.iter().map(|s| null_basis(s, rank_tol)).collect();
    let cols: usize = nulls.iter().map(|n| n.ncols()).sum();
    if cols == 0 {
        return Ok(identity(d));
    }
    let mut stacked = CMat::zeros(d, cols);
    let mut at = 0;
    for n in &nulls {
        stacked.columns_mut(at, n.ncols()).copy_from(n);
        at += n.ncols();
    }
    // The Gram operator of orthonormal null bases has eigenvalues in [0, k];
    // directions in every support sit at zero up to round-off.
    let gram = HermitianOperator::from_hermitian(&stacked * stacked.adjoint());
    let e = gram.eig();
    let cut = rank_tol.max(1e-12);
    Ok(e.columns_where(|v| v <= cut))
}
