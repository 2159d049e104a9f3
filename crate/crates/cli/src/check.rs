//! Self-verification suite behind the `check` subcommand.
//!
//! Each check compares a library computation with an independent oracle:
//! finite differences for derivatives, the closed-form cubic for 3×3
//! eigenvalues, the true displacement for the decomposition, a plain SGD loop
//! for the zero-momentum case and explicit matrix products for `M_t`.

use std::fmt;
use std::str::FromStr;

use saddlescout_core::diagnostics::{decompose_displacement, DisplacementWindow};
use saddlescout_core::linalg::{mt_apply, mt_spectrum, sym_eig, SymMatrix};
use saddlescout_core::optim::{BoostSchedule, InitSpec, RunConfig, Stepper};
use saddlescout_core::problems::{
    generate_phase_retrieval, generate_saddle_quadratic, Objective, Problem, ProblemId,
};
use saddlescout_core::rng::{SeededRng, Stream};
use saddlescout_core::ParamVector;

pub const GRAD_TOL: f64 = 1e-5;
pub const HESSIAN_TOL: f64 = 1e-4;
pub const EIG_TOL: f64 = 1e-10;
pub const DECOMPOSITION_TOL: f64 = 1e-8;
pub const MT_TOL: f64 = 1e-8;

/// Deliberate defects for exercising the suite itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    None,
    /// Every Hessian is scaled by `1 + 1e-3`.
    PerturbedHessian,
}

impl FromStr for Fixture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Fixture::None),
            "perturbed-hessian" => Ok(Fixture::PerturbedHessian),
            other => Err(format!("unknown fixture '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self { name: name.into(), measured, tolerance, pass: measured <= tolerance }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<28} measured {:>10.3e}  tolerance {:>8.1e}  {}",
            self.name,
            self.measured,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

struct PerturbedHessian<'a>(&'a Problem);

impl Objective for PerturbedHessian<'_> {
    fn id(&self) -> ProblemId {
        self.0.id()
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn num_samples(&self) -> usize {
        self.0.num_samples()
    }
    fn sample_value(&self, w: &[f64], i: usize) -> f64 {
        self.0.sample_value(w, i)
    }
    fn add_sample_grad(&self, w: &[f64], i: usize, out: &mut [f64]) {
        self.0.add_sample_grad(w, i, out)
    }
    fn add_sample_hessian(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let mut h = vec![0.0; out.len()];
        self.0.add_sample_hessian(w, i, &mut h);
        for (o, x) in out.iter_mut().zip(h) {
            *o += (1.0 + 1e-3) * x;
        }
    }
}

fn rel_err(analytic: &[f64], approx: &[f64]) -> f64 {
    let diff = analytic.iter().zip(approx).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

/// Worst relative error of the gradient and Hessian against central differences.
pub fn derivative_errors<O: Objective + ?Sized>(obj: &O, points: usize, scale: f64, seed: u64) -> (f64, f64) {
    let mut rng = SeededRng::new(seed, Stream::InitialPoint);
    let d = obj.dim();
    let (mut grad_err, mut hess_err) = (0.0f64, 0.0f64);
    for _ in 0..points {
        let w: ParamVector = (0..d).map(|_| scale * rng.normal()).collect();
        let g = obj.full_grad(&w).expect("finite point");
        let hg = 1e-6;
        let fd: Vec<f64> = (0..d)
            .map(|j| {
                let (mut p, mut m) = (w.clone(), w.clone());
                p[j] += hg;
                m[j] -= hg;
                (obj.value(&p).expect("finite") - obj.value(&m).expect("finite")) / (2.0 * hg)
            })
            .collect();
        grad_err = grad_err.max(rel_err(&g, &fd));

        let h = obj.full_hessian(&w).expect("finite point");
        let hh = 1e-5;
        let mut fdh = vec![0.0; d * d];
        for j in 0..d {
            let (mut p, mut m) = (w.clone(), w.clone());
            p[j] += hh;
            m[j] -= hh;
            let (gp, gm) = (obj.full_grad(&p).expect("finite"), obj.full_grad(&m).expect("finite"));
            for i in 0..d {
                fdh[i * d + j] = (gp[i] - gm[i]) / (2.0 * hh);
            }
        }
        hess_err = hess_err.max(rel_err(h.entries(), &fdh));
    }
    (grad_err, hess_err)
}

/// Eigenvalues of a symmetric 3×3 matrix from the trigonometric solution of its characteristic cubic.
pub fn cubic_eigenvalues(a: &SymMatrix) -> [f64; 3] {
    let g = |i, j| a.get(i, j);
    let p1 = g(0, 1).powi(2) + g(0, 2).powi(2) + g(1, 2).powi(2);
    let q = (g(0, 0) + g(1, 1) + g(2, 2)) / 3.0;
    let p2 = (g(0, 0) - q).powi(2) + (g(1, 1) - q).powi(2) + (g(2, 2) - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q; 3];
    }
    let b = |i: usize, j: usize| (g(i, j) - if i == j { q } else { 0.0 }) / p;
    let det = b(0, 0) * (b(1, 1) * b(2, 2) - b(1, 2) * b(2, 1)) - b(0, 1) * (b(1, 0) * b(2, 2) - b(1, 2) * b(2, 0))
        + b(0, 2) * (b(1, 0) * b(2, 1) - b(1, 1) * b(2, 0));
    let phi = (det / 2.0).clamp(-1.0, 1.0).acos() / 3.0;
    let hi = q + 2.0 * p * phi.cos();
    let lo = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    [lo, 3.0 * q - hi - lo, hi]
}

fn eigen_check(cases: usize) -> f64 {
    let mut rng = SeededRng::new(17, Stream::Dataset);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let v: Vec<f64> = (0..6).map(|_| 3.0 * rng.normal()).collect();
        let a = SymMatrix::from_rows(&[
            vec![v[0], v[1], v[2]],
            vec![v[1], v[3], v[4]],
            vec![v[2], v[4], v[5]],
        ])
        .expect("finite entries");
        let got = sym_eig(&a).expect("converges").eigenvalues;
        let want = cubic_eigenvalues(&a);
        let scale = a.frobenius_norm().max(1.0);
        for (x, y) in got.iter().zip(want) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    worst
}

/// Captures `count` windows across both objectives and three momentum values
/// and returns the worst residual relative to `max(1, ‖Δw‖)`.
pub fn decomposition_check(count: usize, max_len: usize) -> f64 {
    let mut rng = SeededRng::new(23, Stream::Selection);
    let mut worst = 0.0f64;
    for k in 0..count {
        let beta = [0.0, 0.5, 0.9][k % 3];
        let seed = 100 + k as u64;
        // A window must end before the next boosted step.
        let len = 1 + rng.index(max_len);
        let period = (len + rng.index(16)) as u64;
        let t0 = period * rng.index(4) as u64;
        let problem = if k % 2 == 0 {
            Problem::Saddle(generate_saddle_quadratic(seed, 10).expect("valid size"))
        } else {
            Problem::Phase(generate_phase_retrieval(seed, 10, 200).expect("valid size"))
        };
        let (eta, r, scale, batch) = match problem {
            Problem::Saddle(_) => (1e-2, 5e-2, 0.5, 1),
            Problem::Phase(_) => (1e-4, 5e-4, 0.1, 10),
        };
        let mut cfg = RunConfig::new(eta, beta, 0, seed);
        cfg.boost = Some(BoostSchedule { r, period });
        cfg.w0 = InitSpec::Gaussian { scale };
        cfg.batch_size = batch;
        let mut stepper = Stepper::new(&problem, &cfg).expect("valid config");
        for _ in 0..t0 {
            stepper.step().expect("stable step sizes");
        }
        let window = DisplacementWindow::capture(&mut stepper, len).expect("stable step sizes");
        let dec = decompose_displacement(&problem, &window, len).expect("aligned window");
        worst = worst.max(dec.relative_residual());
    }
    worst
}

/// Number of coordinates where momentum with `β = 0` differs from plain SGD.
pub fn sgd_mismatches(problem: &Problem, steps: usize, seed: u64) -> usize {
    let (eta, scale, batch) = match problem {
        Problem::Saddle(_) => (5e-5, 0.5, 1),
        Problem::Phase(_) => (5e-4, 0.01, 10),
    };
    let mut cfg = RunConfig::new(eta, 0.0, 0, seed);
    cfg.w0 = InitSpec::Gaussian { scale };
    cfg.batch_size = batch;
    let mut stepper = Stepper::new(problem, &cfg).expect("valid config");
    let mut sampler = Stepper::new(problem, &cfg).expect("valid config");
    let mut w = cfg.initial_point(problem.dim()).expect("valid init");
    let mut mismatches = 0;
    for _ in 0..steps {
        let sample = sampler.draw_sample();
        let g = problem.stoch_grad(&w, &sample).expect("finite iterate");
        for (wi, gi) in w.iter_mut().zip(g.iter()) {
            *wi -= eta * gi;
        }
        stepper.step().expect("stable step size");
        mismatches += w.iter().zip(stepper.iterate().iter()).filter(|(a, b)| a.to_bits() != b.to_bits()).count();
    }
    mismatches
}

fn dense_mt(h: &SymMatrix, eta: f64, beta: f64, tau: u64, k: u64) -> Vec<f64> {
    let d = h.dim();
    let mut acc: Vec<f64> = (0..d * d).map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 }).collect();
    let factors = (1..tau).chain(k..tau);
    for s in factors {
        let coef = eta * (1.0 - beta.powi(s as i32)) / (1.0 - beta);
        let mut next = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] = (0..d)
                    .map(|l| (if i == l { 1.0 } else { 0.0 } - coef * h.get(i, l)) * acc[l * d + j])
                    .sum();
            }
        }
        acc = next;
    }
    acc
}

/// Worst entrywise difference between the spectral `M_t` and explicit products, relative to `σ_max`.
pub fn mt_check(cases: usize) -> f64 {
    let mut rng = SeededRng::new(31, Stream::Dataset);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let d = 2 + rng.index(4);
        let v: Vec<f64> = (0..d * d).map(|_| 0.5 * rng.normal()).collect();
        let h = SymMatrix::from_fn(d, |i, j| v[i.min(j) * d + i.max(j)]).expect("finite entries");
        let beta = [0.0, 0.5, 0.9][rng.index(3)];
        let tau = 2 + rng.index(49) as u64;
        let k = 1 + rng.index(tau as usize - 1) as u64;
        let eta = 0.01;
        let spec = mt_spectrum(&h, eta, beta, tau, k).expect("PSD at this step size");
        let dense = dense_mt(&h, eta, beta, tau, k);
        let scale = spec.mu_max_log.exp();
        for c in 0..d {
            let mut e = vec![0.0; d];
            e[c] = 1.0;
            let col = mt_apply(&spec, &e).expect("matching dimension");
            for r in 0..d {
                worst = worst.max((col[r] - dense[r * d + c]).abs() / scale);
            }
        }
    }
    worst
}

pub fn run_checks(fixture: Fixture) -> Vec<CheckOutcome> {
    let saddle = Problem::Saddle(generate_saddle_quadratic(1, 10).expect("valid size"));
    let phase = Problem::Phase(generate_phase_retrieval(1, 10, 200).expect("valid size"));
    let mut out = Vec::new();
    for (name, problem, scale) in [("saddle", &saddle, 0.5), ("phase", &phase, 0.3)] {
        let (g, h) = match fixture {
            Fixture::None => derivative_errors(problem, 200, scale, 5),
            Fixture::PerturbedHessian => derivative_errors(&PerturbedHessian(problem), 200, scale, 5),
        };
        out.push(CheckOutcome::new(format!("gradient_fd_{name}"), g, GRAD_TOL));
        out.push(CheckOutcome::new(format!("hessian_fd_{name}"), h, HESSIAN_TOL));
    }
    out.push(CheckOutcome::new("eigen_cubic_oracle", eigen_check(200), EIG_TOL));
    out.push(CheckOutcome::new("decomposition_residual", decomposition_check(100, 50), DECOMPOSITION_TOL));
    for (name, problem) in [("saddle", &saddle), ("phase", &phase)] {
        let n = sgd_mismatches(problem, 10_000, 3);
        out.push(CheckOutcome::new(format!("sgd_equivalence_{name}"), n as f64, 0.0));
    }
    out.push(CheckOutcome::new("mt_dense_product", mt_check(50), MT_TOL));
    out
}
