//! The two qubit experiments: observable sharing under maximum entropy and
//! measurements performed in an unknown order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::compat::{bfm_pair_upper_bound, k_bfm, StateSet};
use crate::error::Result;
use crate::qmat::{c64, outer, pauli_x, pauli_z, CMat, DensityMatrix, HermitianOperator};
use crate::{random, DEFAULT_TOL};

/// Agreement required between the SDP value and the closed form.
pub const FORMULA_AGREEMENT: f64 = 1e-6;

/// `steps` evenly spaced angles on `[0, π]`, endpoints included.
pub fn theta_grid(steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| PI * i as f64 / (n - 1) as f64).collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Point {
    pub theta: f64,
    pub bloch_r: [f64; 3],
    pub k_value: f64,
    /// `1 − ½ cos(θ/2) √(r_x² + r_z²)`.
    pub formula_value: f64,
    /// `1 − D(ρ_A, ρ_B)` computed from the states.
    pub trace_distance_bound: f64,
    /// Whether `(ρ_A + ρ_B − |ρ_A − ρ_B|)/2` is PSD, which makes the
    /// trace-distance bound achievable.
    pub candidate_psd: bool,
    /// Whether the SDP value agrees with the closed form.
    pub bound_attained: bool,
}

/// Alice's and Bob's states for a shared pure state `r` and angle `θ`.
pub fn fig1_states(theta: f64, r: [f64; 3]) -> Result<(DensityMatrix, DensityMatrix)> {
    let (s, c) = (theta / 2.0).sin_cos();
    let o = r[0] * s + r[2] * c;
    let a = DensityMatrix::from_bloch([o * s, 0.0, o * c])?;
    let b = DensityMatrix::from_bloch([r[0], 0.0, 0.0])?;
    Ok((a, b))
}

/// The observable `cos(θ/2) Z + sin(θ/2) X` given to Alice.
pub fn fig1_observable(theta: f64) -> HermitianOperator {
    let (s, c) = (theta / 2.0).sin_cos();
    HermitianOperator::new(pauli_z() * c64(c, 0.0) + pauli_x() * c64(s, 0.0))
        .expect("real combination of Paulis is Hermitian")
}

pub fn fig1_formula(theta: f64, r: [f64; 3]) -> f64 {
    1.0 - 0.5 * (theta / 2.0).cos() * (r[0] * r[0] + r[2] * r[2]).sqrt()
}

/// Closed form for the sphere average as printed with the figure.
pub fn fig1_printed_average(theta: f64) -> f64 {
    1.0 - (theta / 2.0).cos() / 3.0
}

pub fn fig1_point(theta: f64, r: [f64; 3]) -> Result<Fig1Point> {
    fig1_point_with_tol(theta, r, DEFAULT_TOL)
}

pub fn fig1_point_with_tol(theta: f64, r: [f64; 3], tol: f64) -> Result<Fig1Point> {
    let (a, b) = fig1_states(theta, r)?;
    let bound = bfm_pair_upper_bound(&a, &b)?;
    let k_value = k_bfm(&StateSet::pair(a, b)?, tol)?.value.min(1.0);
    let formula_value = fig1_formula(theta, r);
    Ok(Fig1Point {
        theta,
        bloch_r: r,
        k_value,
        formula_value,
        trace_distance_bound: bound.value,
        candidate_psd: bound.attained,
        bound_attained: (k_value - formula_value).abs() <= FORMULA_AGREEMENT,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig1Average {
    pub theta: f64,
    pub samples: usize,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// Sample mean of the per-state closed form over the same samples.
    pub formula_mean: f64,
    pub paper_formula: f64,
    /// Samples whose SDP value differs from the closed form.
    pub discrepant: usize,
    /// Samples whose bound candidate is PSD.
    pub candidate_psd: usize,
    /// Largest `|K − formula|` over samples with a PSD candidate.
    pub max_attained_error: f64,
    /// Largest `K − (1 − D)` over all samples.
    pub max_bound_excess: f64,
}

/// Monte Carlo average over uniformly random pure states. Samples are drawn
/// sequentially from the seed and solved in parallel; the sums run in sample
/// order, so the result is bitwise reproducible.
pub fn fig1_average(theta: f64, samples: usize, seed: u64) -> Result<Fig1Average> {
    fig1_average_with_tol(theta, samples, seed, DEFAULT_TOL)
}

pub fn fig1_average_with_tol(theta: f64, samples: usize, seed: u64, tol: f64) -> Result<Fig1Average> {
    let mut rng = random::seeded(seed);
    let points: Vec<[f64; 3]> = (0..samples).map(|_| random::sphere_point(&mut rng)).collect();
    let values = points
        .par_iter()
        .map(|&r| fig1_point_with_tol(theta, r, tol))
        .collect::<Result<Vec<_>>>()?;
    let n = samples as f64;
    let mean = values.iter().map(|p| p.k_value).sum::<f64>() / n;
    let var = if samples > 1 {
        values.iter().map(|p| (p.k_value - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(Fig1Average {
        theta,
        samples,
        mc_mean: mean,
        mc_stderr: (var / n).sqrt(),
        formula_mean: values.iter().map(|p| p.formula_value).sum::<f64>() / n,
        paper_formula: fig1_printed_average(theta),
        discrepant: values.iter().filter(|p| !p.bound_attained).count(),
        candidate_psd: values.iter().filter(|p| p.candidate_psd).count(),
        max_attained_error: values
            .iter()
            .filter(|p| p.candidate_psd)
            .map(|p| (p.k_value - p.formula_value).abs())
            .fold(0.0, f64::max),
        max_bound_excess: values
            .iter()
            .map(|p| p.k_value - p.trace_distance_bound)
            .fold(f64::NEG_INFINITY, f64::max),
    })
}

pub fn fig1_curve(steps: usize, samples: usize, seed: u64, tol: f64) -> Result<Vec<Fig1Average>> {
    theta_grid(steps)
        .into_iter()
        .map(|t| fig1_average_with_tol(t, samples, seed, tol))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Fig2Point {
    pub theta: f64,
    /// `K(ρ_A^i, ρ_B^j)` indexed `[i][j]`.
    pub k_pairs: [[f64; 2]; 2],
    /// Outcome probabilities normalized to sum to one.
    pub probs: [[f64; 2]; 2],
    pub k_avg: f64,
}

/// Conditional states and outcome weights when the order of the two
/// measurements is unknown.
#[derive(Clone, Debug)]
pub struct Fig2States {
    /// `ρ_A^i`, conditioned on the first party's outcome.
    pub rho_a: [DensityMatrix; 2],
    /// `ρ_B^j`, conditioned on the second party's outcome.
    pub rho_b: [DensityMatrix; 2],
    /// Unnormalized weights `p_ij`.
    pub weights: [[f64; 2]; 2],
}

pub fn fig2_states(theta: f64) -> Result<Fig2States> {
    let (s, c) = (theta / 2.0).sin_cos();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let alice = [outer(&[c64(c, 0.0), c64(s, 0.0)]), outer(&[c64(-s, 0.0), c64(c, 0.0)])];
    let bob = [outer(&[c64(h, 0.0), c64(h, 0.0)]), outer(&[c64(h, 0.0), c64(-h, 0.0)])];
    let joint = |i: usize, j: usize| -> CMat {
        let (a, b) = (&alice[i], &bob[j]);
        b * a * b.adjoint() + a * b * a.adjoint()
    };
    let mut weights = [[0.0; 2]; 2];
    for (i, row) in weights.iter_mut().enumerate() {
        for (j, w) in row.iter_mut().enumerate() {
            *w = joint(i, j).trace().re;
        }
    }
    let conditional = |m: CMat| DensityMatrix::normalized(&HermitianOperator::new(m)?);
    let rho_a = [
        conditional(joint(0, 0) + joint(0, 1))?,
        conditional(joint(1, 0) + joint(1, 1))?,
    ];
    let rho_b = [
        conditional(joint(0, 0) + joint(1, 0))?,
        conditional(joint(0, 1) + joint(1, 1))?,
    ];
    Ok(Fig2States { rho_a, rho_b, weights })
}

pub fn fig2_point(theta: f64) -> Result<Fig2Point> {
    fig2_point_with_tol(theta, DEFAULT_TOL)
}

pub fn fig2_point_with_tol(theta: f64, tol: f64) -> Result<Fig2Point> {
    let Fig2States { rho_a, rho_b, weights } = fig2_states(theta)?;
    let total: f64 = weights.iter().flatten().sum();
    let mut k_pairs = [[0.0; 2]; 2];
    let mut probs = [[0.0; 2]; 2];
    let mut k_avg = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let set = StateSet::pair(rho_a[i].clone(), rho_b[j].clone())?;
            k_pairs[i][j] = k_bfm(&set, tol)?.value.min(1.0);
            probs[i][j] = weights[i][j] / total;
            k_avg += probs[i][j] * k_pairs[i][j];
        }
    }
    Ok(Fig2Point {
        theta,
        k_pairs,
        probs,
        k_avg,
    })
}

pub fn fig2_curve(steps: usize, tol: f64) -> Result<Vec<Fig2Point>> {
    theta_grid(steps)
        .into_par_iter()
        .map(|t| fig2_point_with_tol(t, tol))
        .collect()
}
