//! Seeded inputs shared by the benchmarks.

use qcompat::maxent::ExpectationConstraint;
use qcompat::{random, StateSet};

/// `k` full-rank random states of dimension `d`.
pub fn full_rank_set(d: usize, k: usize, seed: u64) -> StateSet {
    let mut rng = random::seeded(seed);
    StateSet::new((0..k).map(|_| random::density(d, d, &mut rng)).collect()).expect("k ≥ 2 states of one dimension")
}

/// `k` random states of dimension `d` and random ranks.
pub fn mixed_rank_set(d: usize, k: usize, seed: u64) -> StateSet {
    let mut rng = random::seeded(seed);
    StateSet::new((0..k).map(|_| random::density_any_rank(d, &mut rng)).collect())
        .expect("k ≥ 2 states of one dimension")
}

/// `n` random observables with the expectations of one full-rank state, so
/// the constraints are consistent and the maximizer is interior.
pub fn consistent_constraints(d: usize, n: usize, seed: u64) -> Vec<ExpectationConstraint> {
    let mut rng = random::seeded(seed);
    let truth = random::density(d, d, &mut rng);
    (0..n)
        .map(|_| {
            let o = random::hermitian(d, &mut rng);
            let v = o.inner(truth.op());
            ExpectationConstraint::new(o, v)
        })
        .collect()
}
