//! Acceptance suite. Each test covers one criterion, prints a single
//! `criterion N: PASS|FAIL` line and fails when any of its checks fails.
//!
//! Reference values come from oracles written here, independent of the
//! library: a real-symmetric embedding of complex Hermitian matrices for
//! spectra, closed forms for commuting and two-state cases, quadrature for
//! sphere averages and a direct search over the qubit PSD cone.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use qcompat::compat::{self, bfm_reduced_problem, es_direct_problem, es_problem, pp_problem};
use qcompat::maxent::{maxent_estimate, pool_classical};
use qcompat::pooling::pool_measurement;
use qcompat::qmat::{identity, pauli_x, pauli_y, pauli_z};
use qcompat::scenarios;
use qcompat::sdp::{self, dualize};
use qcompat::{
    random, CMat, DensityMatrix, Error, ExpectationConstraint, HermitianOperator, SdpProblem, SolveStatus, StateSet,
};
use rand::Rng;

const TOL: f64 = 1e-8;

// ---------------------------------------------------------------------------
// Reporting

struct Verdict {
    number: u32,
    title: &'static str,
    limit: Duration,
    start: Instant,
    failures: Vec<String>,
    checks: usize,
    notes: Vec<String>,
}

impl Verdict {
    fn new(number: u32, title: &'static str, limit_secs: u64) -> Self {
        Self {
            number,
            title,
            limit: Duration::from_secs(limit_secs),
            start: Instant::now(),
            failures: Vec::new(),
            checks: 0,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }

    fn finish(mut self) {
        let elapsed = self.start.elapsed();
        let limit = self.limit;
        self.check(elapsed <= limit, || format!("runtime {elapsed:.1?} exceeds {limit:?}"));
        let status = if self.failures.is_empty() { "PASS" } else { "FAIL" };
        let mut text = format!(
            "criterion {}: {status} ({}; {} checks, {:.1?})\n",
            self.number, self.title, self.checks, elapsed
        );
        for n in &self.notes {
            text += &format!("    note: {n}\n");
        }
        for f in self.failures.iter().take(20) {
            text += &format!("    failed: {f}\n");
        }
        // Written past the test harness's capture so the verdict shows in
        // every run, passing or not.
        std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .expect("stdout is writable");
        assert!(
            self.failures.is_empty(),
            "criterion {} failed {} of {} checks",
            self.number,
            self.failures.len(),
            self.checks
        );
    }
}

// ---------------------------------------------------------------------------
// Independent linear algebra: `H = A + iB` becomes `[[A, −B], [B, A]]`, whose
// spectrum is that of `H` with every eigenvalue doubled.

fn embed(m: &CMat) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn spectrum(m: &CMat) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(sym(embed(m))).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    // Each eigenvalue appears twice; keep every other one.
    v.into_iter().step_by(2).collect()
}

fn min_eig(m: &CMat) -> f64 {
    spectrum(m)[0]
}

fn real_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let e = SymmetricEigen::new(sym(m.clone()));
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

fn rank(m: &CMat, rel: f64) -> usize {
    let s = spectrum(m);
    let top = s.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    s.iter().filter(|&&v| v > rel * top).count()
}

fn trace_distance(a: &CMat, b: &CMat) -> f64 {
    0.5 * spectrum(&(a - b)).iter().map(|v| v.abs()).sum::<f64>()
}

/// Smallest eigenvalue of `(a + b − |a − b|)/2`.
fn candidate_min_eig(a: &CMat, b: &CMat) -> f64 {
    let (ea, eb) = (embed(a), embed(b));
    let cand = (&ea + &eb - real_fn(&(&ea - &eb), f64::abs)) * 0.5;
    SymmetricEigen::new(sym(cand)).eigenvalues.min()
}

fn entropy(m: &CMat) -> f64 {
    spectrum(m).iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn real_inner(a: &CMat, b: &CMat) -> f64 {
    (a * b).trace().re
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn diag(p: &[f64]) -> DensityMatrix {
    DensityMatrix::diag(p).unwrap()
}

fn state(m: CMat) -> DensityMatrix {
    DensityMatrix::new(HermitianOperator::new(m).unwrap()).unwrap()
}

/// Mixed state supported on the first `r` columns of `u`.
fn on_subspace<R: Rng>(u: &CMat, r: usize, rng: &mut R) -> DensityMatrix {
    let v = u.columns(0, r).into_owned();
    let inner = random::density(r, r, rng);
    state(&v * inner.matrix() * v.adjoint())
}

fn random_set<R: Rng>(d: usize, k: usize, rng: &mut R) -> StateSet {
    let states = (0..k).map(|_| random::density_any_rank(d, rng)).collect();
    StateSet::new(states).unwrap()
}

/// Sets with a mixture of supports: full rank, a shared proper support, and
/// independent random ranks.
fn mixed_sets(n: usize, seed: u64) -> Vec<StateSet> {
    let mut rng = random::seeded(seed);
    (0..n)
        .map(|i| {
            let d = 2 + i % 3;
            let k = 2 + (i / 3) % 3;
            match i % 4 {
                0 | 1 => StateSet::new((0..k).map(|_| random::density(d, d, &mut rng)).collect()).unwrap(),
                2 => {
                    let u = random::unitary(d, &mut rng);
                    let r = rng.random_range(1..d);
                    StateSet::new((0..k).map(|_| on_subspace(&u, r, &mut rng)).collect()).unwrap()
                }
                _ => random_set(d, k, &mut rng),
            }
        })
        .collect()
}

/// `minᵢ λ_min(S^{−1/2} ρᵢ S^{−1/2})` on `supp(S)`, or 0 when the supports
/// differ.
fn es_oracle(s: &StateSet) -> f64 {
    let sum: CMat = s
        .states()
        .iter()
        .map(|r| r.matrix().clone())
        .fold(CMat::zeros(s.dim(), s.dim()), |a, b| a + b);
    let rs = rank(&sum, 1e-9);
    if s.states().iter().any(|r| rank(r.matrix(), 1e-9) != rs) {
        return 0.0;
    }
    let es = SymmetricEigen::new(sym(embed(&sum)));
    let top = es.eigenvalues.max();
    let keep: Vec<usize> = (0..es.eigenvalues.len())
        .filter(|&j| es.eigenvalues[j] > 1e-9 * top)
        .collect();
    let v = DMatrix::from_fn(es.eigenvectors.nrows(), keep.len(), |i, j| {
        es.eigenvectors[(i, keep[j])]
    });
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        keep.len(),
        keep.iter().map(|&j| 1.0 / es.eigenvalues[j].sqrt()),
    ));
    s.states()
        .iter()
        .map(|r| {
            let m = &w * v.transpose() * embed(r.matrix()) * &v * &w;
            SymmetricEigen::new(sym(m)).eigenvalues.min()
        })
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_golden_pair_values() {
    let mut v = Verdict::new(1, "golden pair values", 1);
    let mut rng = random::seeded(101);
    for d in 2..=4 {
        let rho = random::density(d, d, &mut rng);
        let r = compat::k_bfm(&StateSet::pair(rho.clone(), rho.clone()).unwrap(), TOL).unwrap();
        v.check((r.value - 1.0).abs() <= 1e-6, || {
            format!("K(ρ,ρ) = {} for D = {d}", r.value)
        });
        // The program itself, not only the identical-state shortcut.
        let p = compat::bfm_problem(&StateSet::pair(rho.clone(), rho).unwrap());
        let sol = sdp::solve(&p, TOL, 200).unwrap();
        v.check(
            sol.status == SolveStatus::Optimal && (sol.primal_value - 1.0).abs() <= 1e-6,
            || format!("BFM program for (ρ,ρ): {:?} {}", sol.status, sol.primal_value),
        );
    }
    for eps in [0.01, 0.1, 0.3, 0.9] {
        let a = diag(&[1.0, 0.0]);
        let b = diag(&[eps, 1.0 - eps]);
        // Commuting oracle: Σ min(pᵢ, qᵢ).
        let oracle = 1.0f64.min(eps) + 0.0f64.min(1.0 - eps);
        let r = compat::k_bfm(&StateSet::pair(a, b).unwrap(), TOL).unwrap();
        v.check((r.value - oracle).abs() <= 1e-6, || {
            format!("ε = {eps}: K = {}", r.value)
        });
    }
    for d in 2..=4 {
        let u = random::unitary(d, &mut rng);
        let a = state(u.column(0) * u.column(0).adjoint());
        let b = state(u.column(1) * u.column(1).adjoint());
        let r = compat::k_bfm(&StateSet::pair(a, b).unwrap(), TOL).unwrap();
        v.check(r.value.abs() <= 1e-6, || {
            format!("orthogonal pure states, D = {d}: K = {}", r.value)
        });
    }
    v.finish();
}

#[test]
fn criterion_02_trace_distance_bound() {
    let mut v = Verdict::new(2, "trace-distance bound", 30);
    let mut rng = random::seeded(202);
    let mut attained = 0;
    for i in 0..500 {
        let d = 2 + i % 3;
        let a = random::density_any_rank(d, &mut rng);
        let b = random::density_any_rank(d, &mut rng);
        let bound = 1.0 - trace_distance(a.matrix(), b.matrix());
        let r = compat::k_bfm(&StateSet::pair(a.clone(), b.clone()).unwrap(), TOL).unwrap();
        v.check(r.value <= bound + 1e-7, || {
            format!("pair {i}: K = {} > 1 − D = {bound}", r.value)
        });
        if candidate_min_eig(a.matrix(), b.matrix()) >= -1e-10 {
            attained += 1;
            v.check((r.value - bound).abs() <= 1e-6, || {
                format!("pair {i}: candidate PSD but K = {} vs 1 − D = {bound}", r.value)
            });
        }
    }
    v.note(format!("{attained} of 500 pairs have a PSD candidate"));
    v.finish();
}

#[test]
fn criterion_03_oracle_equivalences() {
    let mut v = Verdict::new(3, "oracle equivalences", 60);
    let mut rng = random::seeded(303);
    for i in 0..200 {
        let d = 2 + i % 3;
        let k = 2 + (i / 3) % 3;
        let (states, spectra) = random::commuting_set(d, k, 0.3, &mut rng);
        let oracle: f64 = (0..d)
            .map(|j| spectra.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min))
            .sum();
        let r = compat::k_bfm(&StateSet::new(states).unwrap(), TOL).unwrap();
        v.check((r.value - oracle).abs() <= 1e-6, || {
            format!("commuting set {i}: K = {} vs {oracle}", r.value)
        });
    }
    for i in 0..200 {
        let d = 2 + i % 3;
        let a = random::density_any_rank(d, &mut rng);
        let b = random::density_any_rank(d, &mut rng);
        let oracle = 1.0 - trace_distance(a.matrix(), b.matrix());
        let r = compat::k_pp(&StateSet::pair(a, b).unwrap(), TOL).unwrap();
        v.check((r.value - oracle).abs() <= 1e-6, || {
            format!("PP pair {i}: K = {} vs {oracle}", r.value)
        });
    }
    let mut positive = 0;
    for (i, s) in mixed_sets(200, 304).iter().enumerate() {
        let oracle = es_oracle(s);
        if oracle > 1e-9 {
            positive += 1;
        }
        let r = compat::k_es(s, TOL).unwrap();
        v.check((r.value - oracle).abs() <= 1e-6, || {
            format!("ES set {i}: K = {} vs {oracle}", r.value)
        });
    }
    v.note(format!("{positive} of 200 ES sets have equal supports"));
    v.finish();
}

#[test]
fn criterion_04_theorem_orderings() {
    let mut v = Verdict::new(4, "orderings PP ≥ BFM ≥ ES", 60);
    for (i, s) in mixed_sets(200, 404).iter().enumerate() {
        let bfm = compat::k_bfm(s, TOL).unwrap().value;
        let pp = compat::k_pp(s, TOL).unwrap().value;
        let es = compat::k_es(s, TOL).unwrap().value;
        v.check(pp >= bfm - 1e-7, || format!("set {i}: PP {pp} < BFM {bfm}"));
        v.check(bfm >= es - 1e-7, || format!("set {i}: BFM {bfm} < ES {es}"));
    }
    v.finish();
}

fn corpus() -> Vec<(String, SdpProblem)> {
    let mut out = Vec::new();
    let map = sdp::LinearMap::new(vec![2], vec![2]).copy(0, 0, 1.0);
    let bound = HermitianOperator::diag(&[1.0, 2.0]).into_matrix();
    out.push((
        "trace maximum".into(),
        SdpProblem::new(vec![identity(2)], vec![bound], map).unwrap(),
    ));
    let mut sets = vec![
        StateSet::pair(diag(&[1.0, 0.0]), diag(&[0.3, 0.7])).unwrap(),
        StateSet::pair(diag(&[0.5, 0.5]), diag(&[0.75, 0.25])).unwrap(),
        StateSet::pair(
            DensityMatrix::maximally_mixed(2),
            DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap(),
        )
        .unwrap(),
        StateSet::pair(diag(&[1.0, 0.0]), DensityMatrix::from_bloch([1.0, 0.0, 0.0]).unwrap()).unwrap(),
    ];
    sets.extend(mixed_sets(40, 505));
    for (i, s) in sets.iter().enumerate() {
        if let Some((p, _)) = bfm_reduced_problem(s, 1e-9) {
            out.push((format!("BFM set {i}"), p));
        }
        out.push((format!("PP set {i}"), pp_problem(s)));
        let (p, frame) = es_problem(s, 1e-9);
        if frame.rank() > 0 {
            out.push((format!("ES multiplier form set {i}"), p));
        }
        out.push((format!("ES direct set {i}"), es_direct_problem(s)));
    }
    out
}

fn optimum(p: &SdpProblem) -> std::result::Result<(f64, f64), String> {
    let sol = sdp::solve(p, TOL, 200).map_err(|e| e.to_string())?;
    if sol.status != SolveStatus::Optimal {
        return Err(format!("{:?}", sol.status));
    }
    Ok((sol.value(p), sol.gap))
}

#[test]
fn criterion_05_duality() {
    let mut v = Verdict::new(5, "duality and round trips", 60);
    // Every report over a mixed corpus carries a small nonnegative gap.
    for (i, s) in mixed_sets(120, 506).iter().enumerate() {
        for crit in [compat::Criterion::Bfm, compat::Criterion::Pp, compat::Criterion::Es] {
            let r = compat::measure(crit, s, TOL).unwrap();
            v.check(r.gap <= 1e-7 && r.gap >= -1e-8, || {
                format!("set {i} {crit}: gap {}", r.gap)
            });
            if crit == compat::Criterion::Bfm {
                // Σ Mᵢ ≥ I and Mᵢ ≥ 0, up to roundoff relative to the certificate size.
                let ms: Vec<CMat> = r.dual_certificate.iter().map(|m| m.matrix().clone()).collect();
                let scale = 1.0 + ms.iter().map(max_abs).fold(0.0, f64::max);
                let total = ms.iter().fold(-CMat::identity(s.dim(), s.dim()), |a, m| a + m);
                let worst = ms.iter().map(min_eig).fold(min_eig(&total), f64::min);
                v.check(worst >= -1e-12 * scale, || {
                    format!("set {i}: certificate eigenvalue {worst} at scale {scale}")
                });
            }
        }
    }
    let corpus = corpus();
    for (name, p) in &corpus {
        let d = dualize(p);
        let dd = dualize(&d);
        match (optimum(p), optimum(&d), optimum(&dd)) {
            (Ok((a, ga)), Ok((b, gb)), Ok((c2, gc))) => {
                let scale = a.abs().max(1.0);
                v.check((a - b).abs() <= 1e-7 * scale, || {
                    format!("{name}: primal {a} vs dual {b}")
                });
                v.check((a - c2).abs() <= 1e-7 * scale, || {
                    format!("{name}: primal {a} vs double dual {c2}")
                });
                for g in [ga, gb, gc] {
                    v.check(g <= 1e-7, || format!("{name}: gap {g}"));
                }
            }
            (x, y, z) => v.check(false, || format!("{name}: solves {x:?} {y:?} {z:?}")),
        }
    }
    v.note(format!("{} instances in the round-trip corpus", corpus.len()));

    // Structure of the ES dual: variables αⱼ (1×1) and Mᵢ (r×r), one
    // constraint Σ αⱼ ≥ 1 and r constraints sⱼ (Σᵢ Mᵢ)ⱼⱼ ≥ αⱼ.
    let mut rng = random::seeded(507);
    for d in 2..=4 {
        let s = StateSet::new((0..3).map(|_| random::density(d, d, &mut rng)).collect()).unwrap();
        let (p, frame) = es_problem(&s, 1e-9);
        let dual = dualize(&p);
        let r = frame.rank();
        let mut vars = vec![1; r];
        vars.extend([r; 3]);
        v.check(dual.variable_dims() == vars.as_slice(), || {
            format!("ES dual variables {:?}", dual.variable_dims())
        });
        v.check(dual.constraint_dims() == vec![1; r + 1].as_slice(), || {
            format!("ES dual constraints {:?}", dual.constraint_dims())
        });
        let alphas: Vec<f64> = (0..r).map(|_| rng.random()).collect();
        let mut y: Vec<CMat> = alphas.iter().map(|&a| CMat::from_element(1, 1, c(a))).collect();
        let ms: Vec<CMat> = (0..3).map(|_| random::hermitian(r, &mut rng).into_matrix()).collect();
        y.extend(ms.iter().cloned());
        // The dual map is −Φ*, so the constraints read −(Φ*Y) ≤ −A.
        let image = dual.map.apply(&y);
        let total: CMat = ms.iter().fold(CMat::zeros(r, r), |a, m| a + m);
        let sum_alpha: f64 = alphas.iter().sum();
        v.check((image[0][(0, 0)].re + sum_alpha).abs() < 1e-12, || {
            "ES dual: Σ αⱼ row".into()
        });
        for j in 0..r {
            let want = frame.spectrum[j] * total[(j, j)].re - alphas[j];
            v.check((image[1 + j][(0, 0)].re + want).abs() < 1e-12, || {
                format!("ES dual row {j}")
            });
        }
        v.check(dual.bound[0][(0, 0)].re == -1.0, || "ES dual: Σ αⱼ ≥ 1".into());
        match optimum(&dual) {
            Ok((val, _)) => {
                let oracle = es_oracle(&s);
                v.check((val - oracle).abs() <= 1e-7, || {
                    format!("ES dual optimum {val} vs {oracle}")
                });
            }
            Err(e) => v.check(false, || format!("ES dual solve: {e}")),
        }
    }
    v.finish();
}

#[test]
fn criterion_06_fig1() {
    let mut v = Verdict::new(6, "observable-sharing curve", 120);
    let curve = scenarios::fig1_curve(64, 10_000, 42, TOL).unwrap();
    v.check(curve.len() == 64, || format!("{} points", curve.len()));
    let last = curve.last().unwrap();
    v.check(last.theta == PI && last.mc_mean == 1.0, || {
        format!("θ = π mean {}", last.mc_mean)
    });
    let mut discrepant = 0;
    for (i, p) in curve.iter().enumerate() {
        discrepant += p.discrepant;
        v.check(p.max_attained_error <= 1e-6, || {
            format!("θ[{i}]: error {} where attained", p.max_attained_error)
        });
        v.check(p.max_bound_excess <= 1e-7, || {
            format!("θ[{i}]: K exceeds 1 − D by {}", p.max_bound_excess)
        });
        let printed = 1.0 - (p.theta / 2.0).cos() / 3.0;
        v.check((p.paper_formula - printed).abs() < 1e-15, || {
            format!("θ[{i}]: printed formula {}", p.paper_formula)
        });
        if i > 0 {
            let q = &curve[i - 1];
            let slack = 2.0 * (p.mc_stderr.powi(2) + q.mc_stderr.powi(2)).sqrt();
            v.check(p.mc_mean >= q.mc_mean - slack, || {
                format!("θ[{i}]: {} < {}", p.mc_mean, q.mc_mean)
            });
        }
    }
    // Sphere average of √(r_x² + r_z²) = √(1 − r_y²) with r_y uniform on
    // [−1, 1]: substitute r_y = sin φ and integrate ½cos²φ by Simpson's rule.
    let n = 2000;
    let h = PI / n as f64;
    let f = |x: f64| 0.5 * x.cos().powi(2);
    let quad = (0..=n)
        .map(|j| {
            let w = if j == 0 || j == n {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * f(-FRAC_PI_2 + j as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0;
    let first = &curve[0];
    let expected = 1.0 - 0.5 * quad;
    v.check((first.formula_mean - expected).abs() <= 4.0 * first.mc_stderr, || {
        format!("θ = 0 closed-form mean {} vs quadrature {expected}", first.formula_mean)
    });
    v.check(first.mc_mean <= first.formula_mean + 1e-9, || {
        "θ = 0 mean above the bound".into()
    });

    // Per-sample spot check against oracles written here.
    let mut rng = random::seeded(42);
    for theta in scenarios::theta_grid(8) {
        for _ in 0..100 {
            let r = random::sphere_point(&mut rng);
            let p = scenarios::fig1_point(theta, r).unwrap();
            let (a, b) = scenarios::fig1_states(theta, r).unwrap();
            let one_minus_d = 1.0 - trace_distance(a.matrix(), b.matrix());
            v.check((p.formula_value - one_minus_d).abs() <= 1e-12, || {
                format!("θ = {theta}: closed form vs 1 − D")
            });
            if candidate_min_eig(a.matrix(), b.matrix()) >= -1e-10 {
                v.check((p.k_value - p.formula_value).abs() <= 1e-6, || {
                    format!("θ = {theta}, r = {r:?}")
                });
            }
        }
    }
    v.note(format!(
        "θ = 0: MC mean {:.6}, closed-form mean {:.6}, quadrature 1 − π/8 = {expected:.6}, printed curve {:.6}",
        first.mc_mean, first.formula_mean, first.paper_formula
    ));
    v.note(format!(
        "{discrepant} of {} samples do not attain the bound",
        64 * 10_000
    ));
    v.finish();
}

#[test]
fn criterion_07_fig2() {
    let mut v = Verdict::new(7, "unknown-order measurement curve", 60);
    let p = scenarios::fig2_point(FRAC_PI_2).unwrap();
    v.check((p.k_avg - 1.0).abs() <= 1e-6, || format!("k_avg(π/2) = {}", p.k_avg));
    let p = scenarios::fig2_point(0.0).unwrap();
    let expected = 1.0 - 2f64.sqrt() / 4.0;
    v.check((p.k_avg - expected).abs() <= 1e-6, || format!("k_avg(0) = {}", p.k_avg));
    let curve = scenarios::fig2_curve(64, TOL).unwrap();
    v.check(curve.len() == 64, || format!("{} points", curve.len()));
    for (i, p) in curve.iter().enumerate() {
        let total: f64 = p.probs.iter().flatten().sum();
        v.check((total - 1.0).abs() <= 1e-10, || {
            format!("θ[{i}]: probabilities sum to {total}")
        });
        let avg: f64 = (0..4).map(|j| p.probs[j / 2][j % 2] * p.k_pairs[j / 2][j % 2]).sum();
        v.check((avg - p.k_avg).abs() <= 1e-12, || format!("θ[{i}]: k_avg"));
        let mirror = &curve[63 - i];
        v.check((p.k_avg - mirror.k_avg).abs() <= 1e-7, || {
            format!("θ[{i}]: {} vs mirrored {}", p.k_avg, mirror.k_avg)
        });
        let states = scenarios::fig2_states(p.theta).unwrap();
        for s in states.rho_a.iter().chain(&states.rho_b) {
            v.check(
                (s.matrix().trace().re - 1.0).abs() <= 1e-12 && min_eig(s.matrix()) >= -1e-12,
                || format!("θ[{i}]: invalid conditional state"),
            );
        }
    }
    v.finish();
}

#[test]
fn criterion_08_pooling() {
    let mut v = Verdict::new(8, "measurement pooling", 60);
    let mut rng = random::seeded(808);
    let mut pooled = 0;
    let mut attempt = 0;
    while pooled < 200 {
        attempt += 1;
        let d = 2 + attempt % 3;
        let a = random::density_any_rank(d, &mut rng);
        let b = random::density_any_rank(d, &mut rng);
        if !compat::is_compatible(&StateSet::pair(a.clone(), b.clone()).unwrap(), 1e-9) {
            continue;
        }
        pooled += 1;
        let r = match pool_measurement(&a, &b, 1e-10) {
            Ok(r) => r,
            Err(e) => {
                v.check(false, || format!("pair {attempt}: {e}"));
                continue;
            }
        };
        let blocks: Vec<&CMat> = r.blocks().iter().map(|e| e.matrix()).collect();
        for (j, e) in blocks.iter().enumerate() {
            v.check(min_eig(e) >= -1e-9, || {
                format!("pair {attempt}: block {j} min eig {}", min_eig(e))
            });
        }
        let total: CMat = blocks.iter().fold(CMat::zeros(d, d), |acc, e| acc + *e);
        let dev = max_abs(&(&total - identity(d)));
        v.check(dev <= 1e-8, || format!("pair {attempt}: blocks sum off by {dev}"));
        let ma = blocks[0] + blocks[1];
        let mb = blocks[0] + blocks[2];
        let ra = &ma / c(ma.trace().re);
        let rb = &mb / c(mb.trace().re);
        v.check(max_abs(&(ra - a.matrix())) <= 1e-7, || {
            format!("pair {attempt}: ρ_A marginal")
        });
        v.check(max_abs(&(rb - b.matrix())) <= 1e-7, || {
            format!("pair {attempt}: ρ_B marginal")
        });
        let identity_gap = (r.p00 - r.c * r.k_value / d as f64).abs();
        v.check(identity_gap <= 1e-9, || {
            format!("pair {attempt}: p00 − cK/D = {identity_gap}")
        });
        v.check(r.p00 > 0.0 && r.p00 <= 1.0 + 1e-12, || {
            format!("pair {attempt}: p00 = {}", r.p00)
        });
        // supp(ρ_AB) inside both supports: no weight outside either support.
        for (name, s) in [("A", &a), ("B", &b)] {
            let es = SymmetricEigen::new(sym(embed(s.matrix())));
            let top = es.eigenvalues.max();
            let p = real_fn(&embed(s.matrix()), |x| if x > 1e-9 * top { 1.0 } else { 0.0 });
            let outside = embed(r.joint_state.matrix()) - &p * embed(r.joint_state.matrix()) * &p;
            let w = outside.trace() / 2.0;
            v.check(w.abs() <= 1e-7, || {
                format!("pair {attempt}: ρ_AB weight {w} outside supp ρ_{name}")
            });
        }
    }
    let close = |x: &HermitianOperator, want: &[f64]| x.max_abs_diff(&HermitianOperator::diag(want)) <= 1e-8;
    let half = DensityMatrix::maximally_mixed(2);
    let r = pool_measurement(&half, &half, 1e-10).unwrap();
    v.check((r.p00 - 1.0).abs() <= 1e-8 && close(&r.e00, &[1.0, 1.0]), || {
        format!("I/2 pair: p00 {}", r.p00)
    });
    let z = diag(&[1.0, 0.0]);
    let r = pool_measurement(&z, &z, 1e-10).unwrap();
    v.check((r.p00 - 0.5).abs() <= 1e-8 && close(&r.e11, &[0.0, 1.0]), || {
        format!("pure pair: p00 {}", r.p00)
    });
    let r = pool_measurement(&z, &diag(&[0.3, 0.7]), 1e-10).unwrap();
    v.check((r.p00 - 0.15).abs() <= 1e-8, || {
        format!("commuting pair: p00 {}", r.p00)
    });
    for (e, want) in r.blocks().iter().zip([[0.3, 0.0], [0.7, 0.0], [0.0, 0.7], [0.0, 0.3]]) {
        v.check(close(e, &want), || format!("commuting pair block {want:?}"));
    }
    v.finish();
}

fn con(m: CMat, value: f64) -> ExpectationConstraint {
    ExpectationConstraint::new(HermitianOperator::new(m).unwrap(), value)
}

/// `‖log ρ − P(log ρ)‖_F` with `P` the projection onto span{Oᵢ, I}.
fn gibbs_residual(rho: &CMat, observables: &[CMat]) -> f64 {
    let log = real_fn(&embed(rho), |x| x.ln());
    let mut basis: Vec<DMatrix<f64>> = vec![embed(&identity(rho.nrows()))];
    basis.extend(observables.iter().map(embed));
    let n = basis.len();
    let ip = |a: &DMatrix<f64>, b: &DMatrix<f64>| a.dot(b);
    let g = DMatrix::from_fn(n, n, |i, j| ip(&basis[i], &basis[j]));
    let rhs = nalgebra::DVector::from_fn(n, |i, _| ip(&basis[i], &log));
    let coef = g.svd(true, true).solve(&rhs, 1e-12).unwrap();
    let proj = basis
        .iter()
        .zip(coef.iter())
        .fold(DMatrix::zeros(log.nrows(), log.ncols()), |acc, (b, &w)| acc + b * w);
    // The embedding doubles squared Frobenius norms.
    (log - proj).norm() / 2f64.sqrt()
}

#[test]
fn criterion_09_maxent() {
    let mut v = Verdict::new(9, "maximum entropy", 60);
    for d in 2..=4 {
        let r = maxent_estimate(&[], d).unwrap();
        let dev = max_abs(&(r.state.matrix() - identity(d) / c(d as f64)));
        v.check(dev <= 1e-12, || format!("no constraints, D = {d}: off by {dev}"));
    }
    let contradictory = [con(pauli_x(), 0.5), con(pauli_x(), -0.5)];
    v.check(
        matches!(maxent_estimate(&contradictory, 2), Err(Error::Infeasible { .. })),
        || "⟨X⟩ = ±0.5 not reported infeasible".into(),
    );
    let (a, b, cc, d) = (0.5, 0.5, 0.5, 0.3);
    let bob = vec![con(pauli_y(), d)];
    let case1 = vec![
        con(pauli_x() * c(a) + pauli_y() * c(b), a * a + b * b),
        con(pauli_z(), cc),
    ];
    let case2 = vec![
        con(pauli_y() * c(b) + pauli_z() * c(cc), b * b + cc * cc),
        con(pauli_x(), a),
    ];
    for (name, alice, want) in [("case 1", case1, [0.7, 0.3, 0.5]), ("case 2", case2, [0.5, 0.3, 0.7])] {
        let r = pool_classical(&alice, &bob, 2).unwrap();
        let m = r.state.matrix();
        let got = [
            real_inner(m, &pauli_x()),
            real_inner(m, &pauli_y()),
            real_inner(m, &pauli_z()),
        ];
        let err = got.iter().zip(want).fold(0.0f64, |e, (g, w)| e.max((g - w).abs()));
        v.check(err <= 1e-7, || format!("{name}: Bloch vector {got:?}"));
    }

    let mut rng = random::seeded(909);
    let mut worst_gibbs = 0.0f64;
    let mut worst_residual = 0.0f64;
    for i in 0..100 {
        let d = 2 + i % 2;
        let truth = random::density(d, d, &mut rng);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<ExpectationConstraint> {
            let n = rng.random_range(1..=2);
            (0..n)
                .map(|_| {
                    let o = random::hermitian(d, rng).into_matrix();
                    let val = real_inner(&o, truth.matrix());
                    con(o, val)
                })
                .collect()
        };
        let (ca, cb) = (draw(&mut rng), draw(&mut rng));
        let results = [
            maxent_estimate(&ca, d),
            maxent_estimate(&cb, d),
            pool_classical(&ca, &cb, d),
        ];
        let [Ok(ra), Ok(rb), Ok(rp)] = results else {
            let errs: Vec<String> = results
                .iter()
                .filter_map(|r| r.as_ref().err())
                .map(|e| e.to_string())
                .collect();
            v.check(false, || format!("instance {i}: {errs:?}"));
            continue;
        };
        let union: Vec<&ExpectationConstraint> = ca.iter().chain(&cb).collect();
        for (r, cons) in [
            (&ra, ca.iter().collect::<Vec<_>>()),
            (&rb, cb.iter().collect()),
            (&rp, union),
        ] {
            let m = r.state.matrix();
            let obs: Vec<CMat> = cons.iter().map(|c| c.observable.matrix().clone()).collect();
            let g = gibbs_residual(m, &obs);
            worst_gibbs = worst_gibbs.max(g);
            v.check(g <= 1e-7, || format!("instance {i}: Gibbs residual {g}"));
            for c in &cons {
                let res = (real_inner(c.observable.matrix(), m) - c.value).abs();
                worst_residual = worst_residual.max(res);
                v.check(res <= 1e-8, || format!("instance {i}: constraint residual {res}"));
            }
        }
        let (sa, sb, sp) = (
            entropy(ra.state.matrix()),
            entropy(rb.state.matrix()),
            entropy(rp.state.matrix()),
        );
        v.check(sp <= sa.min(sb) + 1e-8, || {
            format!("instance {i}: pooled entropy {sp} > min({sa}, {sb})")
        });

        // Dominance over feasible alternatives: ρ + tH with H traceless and
        // orthogonal to every pooled observable.
        let m = rp.state.matrix();
        let mut span: Vec<CMat> = vec![identity(d)];
        span.extend(ca.iter().chain(&cb).map(|c| c.observable.matrix().clone()));
        let mut ortho: Vec<CMat> = Vec::new();
        for b in span {
            let mut b = b;
            for q in &ortho {
                b -= q * c(real_inner(q, &b));
            }
            let n = real_inner(&b, &b).sqrt();
            if n > 1e-10 {
                ortho.push(b / c(n));
            }
        }
        for _ in 0..50 {
            let mut h = random::hermitian(d, &mut rng).into_matrix();
            for q in &ortho {
                h -= q * c(real_inner(q, &h));
            }
            if real_inner(&h, &h) < 1e-20 {
                continue;
            }
            let mut t = rng.random_range(0.01..1.0);
            let alt = loop {
                let cand = m + &h * c(t);
                if min_eig(&cand) >= 0.0 {
                    break cand;
                }
                t *= 0.5;
            };
            let s_alt = entropy(&alt);
            v.check(rp.entropy >= s_alt - 1e-8, || {
                format!("instance {i}: alternative entropy {s_alt} > {}", rp.entropy)
            });
        }
    }
    v.note(format!(
        "worst Gibbs residual {worst_gibbs:.2e}, worst constraint residual {worst_residual:.2e}"
    ));
    v.finish();
}

/// Largest `Tr R` over `R ≥ 0` with `R ≤ a, b`, by direct search. Every
/// candidate is `R = s ρ_w` for a Bloch vector `w` in the closed unit ball, and
/// for fixed `w` the largest feasible `s` is the smallest root of
/// `det(ρᵢ − s ρ_w) = det ρᵢ − s τᵢ + s² det ρ_w` over both states, with
/// `τᵢ = Tr ρᵢ Tr ρ_w − Tr ρᵢρ_w`. This leaves a bounded function of `w`,
/// searched on a polar grid and refined by shrinking random sampling.
fn brute_force_qubit(a: &CMat, b: &CMat, rng: &mut impl Rng) -> f64 {
    let det = |m: &CMat| (m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)]).re;
    // Polar coordinates with r = min(u, 1): the unit sphere, where rank-one
    // optima live, becomes a slab of parameter space instead of a surface.
    let point = |p: [f64; 3]| {
        let r = p[0].clamp(0.0, 1.0);
        [r * p[1].sin() * p[2].cos(), r * p[1].sin() * p[2].sin(), r * p[1].cos()]
    };
    let scale = |w: [f64; 3]| -> f64 {
        let rw = (identity(2) + pauli_x() * c(w[0]) + pauli_y() * c(w[1]) + pauli_z() * c(w[2])) * c(0.5);
        let dw = det(&rw);
        [a, b]
            .iter()
            .map(|r| {
                let dr = det(r);
                let tau = r.trace().re * rw.trace().re - (*r * &rw).trace().re;
                2.0 * dr / (tau + (tau * tau - 4.0 * dr * dw).max(0.0).sqrt())
            })
            .fold(f64::INFINITY, f64::min)
    };
    let f = |p: [f64; 3]| scale(point(p));
    let mut best = ([0.0; 3], f([0.0; 3]));
    let (nu, na) = (12, 24);
    for i in 1..=nu {
        for j in 0..=na / 2 {
            for k in 0..na {
                let p = [
                    1.2 * i as f64 / nu as f64,
                    PI * j as f64 / (na / 2) as f64,
                    2.0 * PI * k as f64 / na as f64,
                ];
                let v = f(p);
                if v > best.1 {
                    best = (p, v);
                }
            }
        }
    }
    // Refine with random points in a box around the incumbent, shrinking the
    // box after a round without progress. Random offsets keep finding the
    // thin ascent wedge along the ridge where both constraints bind, on
    // which coordinate or grid moves stall.
    let mut h = 0.1;
    while h > 1e-10 {
        let center = best.0;
        for _ in 0..2000 {
            let off = [0; 3].map(|_: i32| h * rng.random_range(-1.0..1.0));
            let p = [
                (center[0] + off[0]).clamp(0.0, 1.2),
                center[1] + off[1],
                center[2] + off[2],
            ];
            let v = f(p);
            if v > best.1 {
                best = (p, v);
            }
        }
        if best.0 == center {
            h *= 0.7;
        }
    }
    best.1
}

#[test]
fn criterion_10_qubit_brute_force() {
    let mut v = Verdict::new(10, "qubit brute force", 120);
    let mut rng = random::seeded(1010);
    let mut worst = 0.0f64;
    for i in 0..50 {
        let a = random::density(2, 2, &mut rng);
        let b = random::density(2, 2, &mut rng);
        let brute = brute_force_qubit(a.matrix(), b.matrix(), &mut rng);
        let r = compat::k_bfm(&StateSet::pair(a, b).unwrap(), TOL).unwrap();
        worst = worst.max((r.value - brute).abs());
        v.check((r.value - brute).abs() <= 1e-4, || {
            format!("pair {i}: SDP {} vs search {brute}", r.value)
        });
    }
    v.note(format!("worst difference {worst:.2e}"));
    v.finish();
}
