//! Seeded random states, unitaries and sphere points.
//!
//! All generators take an explicit RNG; [`seeded`] gives the ChaCha stream
//! used everywhere a reproducible seed is accepted.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::qmat::{c64, CMat, DensityMatrix, HermitianOperator};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

/// Haar-random unitary (QR of a Ginibre matrix with phase correction).
pub fn unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMat {
    let qr = ginibre(d, d, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        if n > 0.0 {
            let ph = rjj / n;
            for i in 0..d {
                q[(i, j)] *= ph;
            }
        }
    }
    q
}

/// Random Hermitian matrix (GUE-like scale).
pub fn hermitian<R: Rng + ?Sized>(d: usize, rng: &mut R) -> HermitianOperator {
    let g = ginibre(d, d, rng);
    HermitianOperator::new((&g + g.adjoint()).scale(0.5)).expect("hermitian by construction")
}

/// Random density matrix of the given rank (induced measure `G G† / Tr`).
pub fn density<R: Rng + ?Sized>(d: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(d, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = crate::qmat::trace_re(&m);
    DensityMatrix::from_matrix(m.scale(1.0 / t)).expect("valid state by construction")
}

/// Random state with a random rank in `1..=d`.
pub fn density_any_rank<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DensityMatrix {
    let rank = rng.random_range(1..=d);
    density(d, rank, rng)
}

/// Random probability vector, optionally with some entries forced to zero.
pub fn probabilities<R: Rng + ?Sized>(d: usize, zero_prob: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let mut p: Vec<f64> = (0..d)
            .map(|_| {
                if rng.random::<f64>() < zero_prob {
                    0.0
                } else {
                    -rng.random::<f64>().max(1e-300).ln()
                }
            })
            .collect();
        let s: f64 = p.iter().sum();
        if s > 0.0 {
            p.iter_mut().for_each(|x| *x /= s);
            return p;
        }
    }
}

/// `k` states that are diagonal in a shared random basis. Returns the states
/// and their eigenvalue lists in that basis.
pub fn commuting_set<R: Rng + ?Sized>(
    d: usize,
    k: usize,
    zero_prob: f64,
    rng: &mut R,
) -> (Vec<DensityMatrix>, Vec<Vec<f64>>) {
    let u = unitary(d, rng);
    let mut states = Vec::with_capacity(k);
    let mut spectra = Vec::with_capacity(k);
    for _ in 0..k {
        let p = probabilities(d, zero_prob, rng);
        let s = DensityMatrix::new(HermitianOperator::diag(&p).conjugate(&u)).expect("valid state");
        states.push(s);
        spectra.push(p);
    }
    (states, spectra)
}

/// Uniform point on the unit sphere: azimuth uniform on `[0, 2π)` and polar
/// cosine uniform on `[−1, 1]`, which gives the area-correct polar density.
pub fn sphere_point<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let cos_t = 2.0 * rng.random::<f64>() - 1.0;
    let sin_t = (1.0 - cos_t * cos_t).max(0.0).sqrt();
    [sin_t * phi.cos(), sin_t * phi.sin(), cos_t]
}
