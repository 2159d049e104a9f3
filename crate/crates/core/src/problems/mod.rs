//! The two saddle-bearing stochastic objectives.
//!
//! Both are finite sums `f(w) = (1/n) Σ_i f_i(w)`; the stochastic sample `ξ`
//! is a mini-batch of indices drawn uniformly with replacement.

mod dataset;
mod phase;
mod saddle;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::linalg::SymMatrix;
use crate::rng::SeededRng;
use crate::vector::{norm, ParamVector};

pub use dataset::{read_dataset, write_dataset};
pub use phase::{generate_phase_retrieval, PhaseRetrievalInstance};
pub use saddle::{generate_saddle_quadratic, SaddleQuadraticInstance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error("non-finite iterate")]
    NonFinite,
    #[error("sample index {index} out of range for n = {n}")]
    InvalidSample { index: usize, n: usize },
    #[error("reference point has zero norm")]
    DegenerateTruth,
    #[error("dataset line {line}: {msg}")]
    Dataset { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    SaddleQuadratic,
    PhaseRetrieval,
}

impl ProblemId {
    pub fn as_str(self) -> &'static str {
        match self {
            ProblemId::SaddleQuadratic => "saddle_quadratic",
            ProblemId::PhaseRetrieval => "phase_retrieval",
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemId {
    type Err = ProblemError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "saddle_quadratic" | "saddle" => Ok(ProblemId::SaddleQuadratic),
            "phase_retrieval" | "phase" => Ok(ProblemId::PhaseRetrieval),
            other => Err(ProblemError::InvalidParameter(format!("unknown problem '{other}'"))),
        }
    }
}

/// The realized `ξ_t`: which data points the stochastic gradient averages over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticSample {
    pub indices: Vec<usize>,
}

impl StochasticSample {
    pub fn single(index: usize) -> Self {
        Self { indices: vec![index] }
    }

    /// `batch` indices drawn uniformly from `[0, n)` with replacement.
    pub fn draw(rng: &mut SeededRng, n: usize, batch: usize) -> Self {
        Self { indices: (0..batch).map(|_| rng.index(n)).collect() }
    }
}

/// A finite-sum objective with analytic per-sample derivatives.
///
/// Implementors supply the per-sample pieces; the full and stochastic
/// versions are averaged here so that `full_grad` is bit-for-bit the mean of
/// the single-index `stoch_grad`s taken in index order.
pub trait Objective: Send + Sync {
    fn id(&self) -> ProblemId;
    fn dim(&self) -> usize;
    fn num_samples(&self) -> usize;

    fn sample_value(&self, w: &[f64], i: usize) -> f64;
    /// `out += ∇f_i(w)`
    fn add_sample_grad(&self, w: &[f64], i: usize, out: &mut [f64]);
    /// `out += ∇²f_i(w)`, row-major d×d.
    fn add_sample_hessian(&self, w: &[f64], i: usize, out: &mut [f64]);

    /// Ground-truth model, when the objective has one.
    fn truth(&self) -> Option<&[f64]> {
        None
    }

    fn check_point(&self, w: &[f64]) -> Result<(), ProblemError> {
        if w.len() != self.dim() {
            return Err(ProblemError::DimensionError { expected: self.dim(), got: w.len() });
        }
        if w.iter().any(|x| !x.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        Ok(())
    }

    fn value(&self, w: &[f64]) -> Result<f64, ProblemError> {
        self.check_point(w)?;
        let n = self.num_samples();
        Ok((0..n).map(|i| self.sample_value(w, i)).sum::<f64>() / n as f64)
    }

    fn stoch_grad(&self, w: &[f64], s: &StochasticSample) -> Result<ParamVector, ProblemError> {
        self.check_point(w)?;
        let n = self.num_samples();
        if s.indices.is_empty() {
            return Err(ProblemError::InvalidParameter("empty sample".into()));
        }
        let mut g = ParamVector::zeros(self.dim());
        for &i in &s.indices {
            if i >= n {
                return Err(ProblemError::InvalidSample { index: i, n });
            }
            self.add_sample_grad(w, i, &mut g);
        }
        if s.indices.len() > 1 {
            g.scale(1.0 / s.indices.len() as f64);
        }
        Ok(g)
    }

    fn full_grad(&self, w: &[f64]) -> Result<ParamVector, ProblemError> {
        self.check_point(w)?;
        let n = self.num_samples();
        let mut g = ParamVector::zeros(self.dim());
        for i in 0..n {
            self.add_sample_grad(w, i, &mut g);
        }
        for x in g.iter_mut() {
            *x /= n as f64;
        }
        Ok(g)
    }

    fn full_hessian(&self, w: &[f64]) -> Result<SymMatrix, ProblemError> {
        self.check_point(w)?;
        let (d, n) = (self.dim(), self.num_samples());
        let mut h = vec![0.0; d * d];
        for i in 0..n {
            self.add_sample_hessian(w, i, &mut h);
        }
        for x in &mut h {
            *x /= n as f64;
        }
        SymMatrix::new(d, h).map_err(|_| ProblemError::NonFinite)
    }

    /// `ξ = stoch_grad(w, s) - full_grad(w)`
    fn noise_vector(&self, w: &[f64], s: &StochasticSample) -> Result<ParamVector, ProblemError> {
        let g = self.stoch_grad(w, s)?;
        let full = self.full_grad(w)?;
        Ok(g.sub(&full))
    }
}

/// Either of the two objectives, as owned by an experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Saddle(SaddleQuadraticInstance),
    Phase(PhaseRetrievalInstance),
}

impl Problem {
    pub fn seed(&self) -> u64 {
        match self {
            Problem::Saddle(p) => p.seed,
            Problem::Phase(p) => p.seed,
        }
    }
}

macro_rules! delegate {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Saddle($p) => $e,
            Problem::Phase($p) => $e,
        }
    };
}

impl Objective for Problem {
    fn id(&self) -> ProblemId {
        delegate!(self, p => p.id())
    }
    fn dim(&self) -> usize {
        delegate!(self, p => p.dim())
    }
    fn num_samples(&self) -> usize {
        delegate!(self, p => p.num_samples())
    }
    fn sample_value(&self, w: &[f64], i: usize) -> f64 {
        delegate!(self, p => p.sample_value(w, i))
    }
    fn add_sample_grad(&self, w: &[f64], i: usize, out: &mut [f64]) {
        delegate!(self, p => p.add_sample_grad(w, i, out))
    }
    fn add_sample_hessian(&self, w: &[f64], i: usize, out: &mut [f64]) {
        delegate!(self, p => p.add_sample_hessian(w, i, out))
    }
    fn truth(&self) -> Option<&[f64]> {
        delegate!(self, p => p.truth())
    }
}

/// `min(‖w - w*‖, ‖w + w*‖) / ‖w*‖`, the sign-invariant recovery error.
pub fn relative_distance(w: &[f64], w_star: &[f64]) -> Result<f64, ProblemError> {
    if w.len() != w_star.len() {
        return Err(ProblemError::DimensionError { expected: w_star.len(), got: w.len() });
    }
    let scale = norm(w_star);
    if scale == 0.0 {
        return Err(ProblemError::DegenerateTruth);
    }
    let (mut minus, mut plus) = (0.0, 0.0);
    for (a, b) in w.iter().zip(w_star) {
        minus += (a - b) * (a - b);
        plus += (a + b) * (a + b);
    }
    Ok(minus.min(plus).sqrt() / scale)
}
