use crate::rng::{SeededRng, Stream};
use crate::vector::{dot, ParamVector};

use super::{Objective, ProblemError, ProblemId};

/// Real phase retrieval, `f_i(w) = ((a_iᵀw)² - y_i)²` with `y_i = (a_iᵀw*)²`.
///
/// Minimizers are exactly `±w*` (up to the design); the origin is a strict saddle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRetrievalInstance {
    pub d: usize,
    /// Design vectors, row-major n×d.
    pub a: Vec<f64>,
    pub y: Vec<f64>,
    pub w_star: ParamVector,
    pub seed: u64,
}

/// `w* ~ N(0, I/d)`, `a_i ~ N(0, I)`, `y_i = (a_iᵀw*)²`.
pub fn generate_phase_retrieval(
    seed: u64,
    d: usize,
    n: usize,
) -> Result<PhaseRetrievalInstance, ProblemError> {
    if d < 1 || n < 1 {
        return Err(ProblemError::InvalidParameter(format!("need d >= 1 and n >= 1, got d = {d}, n = {n}")));
    }
    let mut rng = SeededRng::new(seed, Stream::Dataset);
    let scale = 1.0 / (d as f64).sqrt();
    let w_star: ParamVector = (0..d).map(|_| scale * rng.normal()).collect();
    let a: Vec<f64> = (0..n * d).map(|_| rng.normal()).collect();
    Ok(PhaseRetrievalInstance::from_parts(d, a, w_star, seed))
}

impl PhaseRetrievalInstance {
    /// Builds an instance from a design and a truth; measurements are recomputed.
    pub fn from_parts(d: usize, a: Vec<f64>, w_star: ParamVector, seed: u64) -> Self {
        let y = a
            .chunks_exact(d)
            .map(|row| {
                let u = dot(row, &w_star);
                u * u
            })
            .collect();
        Self { d, a, y, w_star, seed }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.d..(i + 1) * self.d]
    }
}

impl Objective for PhaseRetrievalInstance {
    fn id(&self) -> ProblemId {
        ProblemId::PhaseRetrieval
    }

    fn dim(&self) -> usize {
        self.d
    }

    fn num_samples(&self) -> usize {
        self.y.len()
    }

    fn sample_value(&self, w: &[f64], i: usize) -> f64 {
        let u = dot(self.row(i), w);
        let r = u * u - self.y[i];
        r * r
    }

    fn add_sample_grad(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let a = self.row(i);
        let u = dot(a, w);
        let c = 4.0 * (u * u - self.y[i]) * u;
        for (o, aj) in out.iter_mut().zip(a) {
            *o += c * aj;
        }
    }

    fn add_sample_hessian(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let a = self.row(i);
        let u = dot(a, w);
        let c = 4.0 * (3.0 * u * u - self.y[i]);
        let d = self.d;
        for r in 0..d {
            for s in 0..d {
                out[r * d + s] += c * a[r] * a[s];
            }
        }
    }

    fn truth(&self) -> Option<&[f64]> {
        Some(&self.w_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::StochasticSample;

    #[test]
    fn truth_is_a_zero_of_f() {
        for seed in 0..10 {
            let inst = generate_phase_retrieval(seed, 10, 200).unwrap();
            let v = inst.value(&inst.w_star).unwrap();
            assert!(v.abs() <= 1e-18, "{v}");
            let neg = inst.w_star.scaled(-1.0);
            assert_eq!(inst.value(&neg).unwrap(), v);
        }
    }

    #[test]
    fn gradient_vanishes_at_truth() {
        let inst = generate_phase_retrieval(3, 10, 200).unwrap();
        for i in 0..200 {
            let g = inst.stoch_grad(&inst.w_star, &StochasticSample::single(i)).unwrap();
            assert!(g.norm() <= 1e-14, "sample {i}: {}", g.norm());
        }
    }

    #[test]
    fn sign_symmetry_is_exact() {
        let inst = generate_phase_retrieval(5, 10, 50).unwrap();
        let mut rng = SeededRng::new(99, Stream::InitialPoint);
        for _ in 0..100 {
            let w: ParamVector = (0..10).map(|_| rng.normal()).collect();
            assert_eq!(inst.value(&w).unwrap(), inst.value(&w.scaled(-1.0)).unwrap());
        }
    }

    #[test]
    fn truth_norm_is_about_one() {
        let mut total = 0.0;
        for seed in 0..50 {
            let inst = generate_phase_retrieval(seed, 10, 100_000).unwrap();
            total += inst.w_star.norm().powi(2);
        }
        let mean = total / 50.0;
        assert!((mean - 1.0).abs() <= 0.1, "{mean}");
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_phase_retrieval(1, 0, 10).is_err());
        assert!(generate_phase_retrieval(1, 10, 0).is_err());
    }

    #[test]
    fn noise_matches_recomputation() {
        let inst = generate_phase_retrieval(8, 10, 200).unwrap();
        let mut rng = SeededRng::new(1, Stream::InitialPoint);
        let w: ParamVector = (0..10).map(|_| 0.3 * rng.normal()).collect();
        for i in [0, 17, 199] {
            let s = StochasticSample::single(i);
            let xi = inst.noise_vector(&w, &s).unwrap();
            let g = inst.stoch_grad(&w, &s).unwrap();
            let full = inst.full_grad(&w).unwrap();
            for j in 0..10 {
                assert_eq!(xi[j].to_bits(), (g[j] - full[j]).to_bits());
            }
        }
    }
}
