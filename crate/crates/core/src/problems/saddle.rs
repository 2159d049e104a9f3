use crate::linalg::SymMatrix;
use crate::rng::{SeededRng, Stream};

use super::{Objective, ProblemError, ProblemId};

/// Standard deviations of the two components of `b_i`.
const B_STD: [f64; 2] = [0.316_227_766_016_837_94, 0.031_622_776_601_683_79];

/// `f_i(w) = ½ wᵀHw + b_iᵀw + penalty·Σ_j w_j¹⁰` with `H = diag(1, -0.1)`.
///
/// The origin is a saddle neighbourhood with `f(0) = 0`; the escape direction
/// is the second coordinate, where the perturbations are small.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleQuadraticInstance {
    pub h_base: SymMatrix,
    pub b: Vec<[f64; 2]>,
    /// Coefficient of `Σ w_j¹⁰`; 1 for the standard objective.
    pub penalty: f64,
    pub seed: u64,
}

/// Draws `b_i ~ N(0, diag(0.1, 0.001))`, `i = 1..n`.
pub fn generate_saddle_quadratic(
    seed: u64,
    n: usize,
) -> Result<SaddleQuadraticInstance, ProblemError> {
    if n < 1 {
        return Err(ProblemError::InvalidParameter("n must be >= 1".into()));
    }
    let mut rng = SeededRng::new(seed, Stream::Dataset);
    let b = (0..n)
        .map(|_| {
            let z0 = rng.normal();
            let z1 = rng.normal();
            [B_STD[0] * z0, B_STD[1] * z1]
        })
        .collect();
    Ok(SaddleQuadraticInstance::from_parts(b, seed))
}

impl SaddleQuadraticInstance {
    pub fn from_parts(b: Vec<[f64; 2]>, seed: u64) -> Self {
        Self {
            h_base: SymMatrix::diag(&[1.0, -0.1]).expect("constant matrix"),
            b,
            penalty: 1.0,
            seed,
        }
    }

    pub fn with_penalty(mut self, penalty: f64) -> Self {
        self.penalty = penalty;
        self
    }

    /// `H·w` for the fixed 2×2 base matrix.
    fn h_times(&self, w: &[f64]) -> [f64; 2] {
        let h = self.h_base.entries();
        [h[0] * w[0] + h[1] * w[1], h[2] * w[0] + h[3] * w[1]]
    }
}

impl Objective for SaddleQuadraticInstance {
    fn id(&self) -> ProblemId {
        ProblemId::SaddleQuadratic
    }

    fn dim(&self) -> usize {
        2
    }

    fn num_samples(&self) -> usize {
        self.b.len()
    }

    fn sample_value(&self, w: &[f64], i: usize) -> f64 {
        let hw = self.h_times(w);
        let quad = 0.5 * (w[0] * hw[0] + w[1] * hw[1]);
        let lin = self.b[i][0] * w[0] + self.b[i][1] * w[1];
        let pen: f64 = w.iter().map(|x| x.powi(10)).sum();
        quad + lin + self.penalty * pen
    }

    fn add_sample_grad(&self, w: &[f64], i: usize, out: &mut [f64]) {
        let hw = self.h_times(w);
        for j in 0..2 {
            out[j] += hw[j] + self.b[i][j] + self.penalty * 10.0 * w[j].powi(9);
        }
    }

    fn add_sample_hessian(&self, w: &[f64], _i: usize, out: &mut [f64]) {
        let h = self.h_base.entries();
        for (o, x) in out.iter_mut().zip(h) {
            *o += x;
        }
        for j in 0..2 {
            out[j * 2 + j] += self.penalty * 90.0 * w[j].powi(8);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::StochasticSample;

    #[test]
    fn deterministic_per_seed() {
        let a = generate_saddle_quadratic(1, 10).unwrap();
        let b = generate_saddle_quadratic(1, 10).unwrap();
        assert_eq!(a, b);
        let c = generate_saddle_quadratic(2, 10).unwrap();
        assert_ne!(a.b, c.b);
    }

    #[test]
    fn rejects_empty() {
        assert!(generate_saddle_quadratic(1, 0).is_err());
    }

    #[test]
    fn value_at_origin_is_zero() {
        for seed in 0..20 {
            let inst = generate_saddle_quadratic(seed, 10).unwrap();
            assert_eq!(inst.value(&[0.0, 0.0]).unwrap(), 0.0);
        }
    }

    #[test]
    fn component_variances() {
        let inst = generate_saddle_quadratic(11, 100_000).unwrap();
        let n = inst.b.len() as f64;
        for (j, target) in [0.1, 0.001].into_iter().enumerate() {
            let mean = inst.b.iter().map(|b| b[j]).sum::<f64>() / n;
            let var = inst.b.iter().map(|b| (b[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var / target - 1.0).abs() <= 0.05, "component {j}: {var}");
        }
    }

    #[test]
    fn gradient_at_origin_is_b() {
        let inst = generate_saddle_quadratic(4, 10).unwrap();
        for i in 0..10 {
            let g = inst.stoch_grad(&[0.0, 0.0], &StochasticSample::single(i)).unwrap();
            assert_eq!(g.as_slice(), &inst.b[i]);
        }
    }

    #[test]
    fn noise_at_origin_is_centered_b() {
        let inst = generate_saddle_quadratic(4, 10).unwrap();
        let mean = inst.full_grad(&[0.0, 0.0]).unwrap();
        for i in 0..10 {
            let xi = inst.noise_vector(&[0.0, 0.0], &StochasticSample::single(i)).unwrap();
            for j in 0..2 {
                assert_eq!(xi[j], inst.b[i][j] - mean[j]);
            }
        }
    }

    #[test]
    fn penalty_term_is_even() {
        let inst = generate_saddle_quadratic(4, 10).unwrap();
        let zero_b = SaddleQuadraticInstance::from_parts(vec![[0.0, 0.0]; 10], inst.seed);
        let w = [0.37, -0.81];
        let neg = [-0.37, 0.81];
        assert_eq!(zero_b.value(&w).unwrap(), zero_b.value(&neg).unwrap());
    }

    #[test]
    fn dimension_mismatch() {
        let inst = generate_saddle_quadratic(4, 10).unwrap();
        assert!(matches!(
            inst.full_grad(&[0.0, 0.0, 0.0]),
            Err(ProblemError::DimensionError { expected: 2, got: 3 })
        ));
    }
}
