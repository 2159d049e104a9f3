//! Small dense symmetric linear algebra.
//!
//! Everything here is sized for Hessians of the test objectives (d ≤ 64):
//! a cyclic Jacobi eigensolver and the spectral form of the matrix
//! polynomial `M_t = (Π_{s=1}^{τ-1} G_s)(Π_{s=k}^{τ-1} G_s)` with
//! `G_s = I - η·c_s·H` and `c_s = (1-β^s)/(1-β)`.
//!
//! `M_t` is a polynomial in `H`, so it is diagonal in the eigenbasis of `H`.
//! Its eigenvalues are kept as natural logs; products with τ in the hundreds
//! of thousands would otherwise underflow or overflow.

use thiserror::Error;

use crate::vector::{norm, ParamVector};

/// Largest dimension the dense routines accept.
pub const MAX_DIM: usize = 64;

/// Jacobi stops once the off-diagonal Frobenius norm is at most this times ‖A‖_F.
pub const JACOBI_TOL: f64 = 1e-12;
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Components below this magnitude are skipped when fixing eigenvector signs.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("Jacobi eigensolver did not converge in {sweeps} sweeps (off-diagonal norm {off_norm:e})")]
    NoConvergence { sweeps: usize, off_norm: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("factor G_s not PSD: eta*c_s*lambda = {product} >= 1 at s = {s}")]
    NotPsd { s: u64, product: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
}

/// Symmetric d×d matrix with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    d: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from row-major entries, symmetrizing as (A + Aᵀ)/2.
    pub fn new(d: usize, mut entries: Vec<f64>) -> Result<Self, LinalgError> {
        if d == 0 {
            return Err(LinalgError::InvalidMatrix("dimension must be >= 1".into()));
        }
        if entries.len() != d * d {
            return Err(LinalgError::InvalidMatrix(format!(
                "expected {} entries for d = {d}, got {}",
                d * d,
                entries.len()
            )));
        }
        if let Some(pos) = entries.iter().position(|x| !x.is_finite()) {
            return Err(LinalgError::InvalidMatrix(format!(
                "non-finite entry at ({}, {})",
                pos / d,
                pos % d
            )));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = (entries[i * d + j] + entries[j * d + i]) / 2.0;
                entries[i * d + j] = avg;
                entries[j * d + i] = avg;
            }
        }
        Ok(Self { d, entries })
    }

    pub fn from_fn(d: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self, LinalgError> {
        let entries = (0..d * d).map(|p| f(p / d, p % d)).collect();
        Self::new(d, entries)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(LinalgError::InvalidMatrix("rows must form a square matrix".into()));
        }
        Self::new(d, rows.concat())
    }

    pub fn diag(values: &[f64]) -> Result<Self, LinalgError> {
        Self::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    pub fn identity(d: usize) -> Self {
        Self::diag(&vec![1.0; d]).expect("identity is valid")
    }

    pub fn zeros(d: usize) -> Self {
        Self::diag(&vec![0.0; d]).expect("zero matrix is valid")
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.d + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.entries)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<ParamVector, LinalgError> {
        self.check_dim(x.len())?;
        Ok(self
            .entries
            .chunks_exact(self.d)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    /// xᵀ A x
    pub fn quad_form(&self, x: &[f64]) -> Result<f64, LinalgError> {
        let ax = self.mul_vec(x)?;
        Ok(ax.dot(x))
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), LinalgError> {
        if got != self.d {
            return Err(LinalgError::DimensionError { expected: self.d, got });
        }
        Ok(())
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` pairs with `eigenvalues[i]`.
    pub eigenvectors: Vec<ParamVector>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// Unit eigenvector of the smallest eigenvalue (lowest index on ties).
    pub fn v_min(&self) -> &ParamVector {
        &self.eigenvectors[0]
    }

    /// Coordinates of `x` in the eigenbasis, `Uᵀx`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.eigenvectors.iter().map(|v| v.dot(x)).collect()
    }

    /// `U·diag(scale)·Uᵀ·x`
    pub fn apply_spectral(&self, scale: &[f64], x: &[f64]) -> ParamVector {
        let coords = self.project(x);
        let mut out = ParamVector::zeros(self.dim());
        for ((v, c), s) in self.eigenvectors.iter().zip(&coords).zip(scale) {
            out.axpy(c * s, v);
        }
        out
    }

    /// `U·diag(λ)·Uᵀ` as a dense matrix.
    pub fn reconstruct(&self) -> SymMatrix {
        let d = self.dim();
        SymMatrix::from_fn(d, |i, j| {
            self.eigenvalues
                .iter()
                .zip(&self.eigenvectors)
                .map(|(l, v)| l * v[i] * v[j])
                .sum()
        })
        .expect("reconstruction of finite eigenpairs is finite")
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(a: &SymMatrix) -> Result<EigenDecomposition, LinalgError> {
    let d = a.dim();
    if d > MAX_DIM {
        return Err(LinalgError::InvalidMatrix(format!("dimension {d} exceeds {MAX_DIM}")));
    }
    let mut m = a.entries.clone();
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale = a.frobenius_norm();
    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[i * d + j] * m[i * d + j];
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&m);
        if off <= JACOBI_TOL * scale {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(LinalgError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                m[p * d + q] = 0.0;
                m[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[i * d + i].total_cmp(&m[j * d + j]));
    let eigenvalues = order.iter().map(|&i| m[i * d + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&col| {
            let mut vec: ParamVector = (0..d).map(|row| v[row * d + col]).collect();
            let n = vec.norm();
            vec.scale(1.0 / n);
            if let Some(first) = vec.iter().find(|x| x.abs() > SIGN_EPS) {
                if *first < 0.0 {
                    vec.scale(-1.0);
                }
            }
            vec
        })
        .collect();
    Ok(EigenDecomposition { eigenvalues, eigenvectors })
}

/// `(1 - β^s)/(1 - β) = Σ_{j=0}^{s-1} β^j`, the scalar in `G_s = I - η·coef·H`.
pub fn gst_coefficient(beta: f64, s: u64) -> Result<f64, LinalgError> {
    check_beta(beta)?;
    if s == 0 {
        return Err(LinalgError::InvalidParameter("s must be >= 1".into()));
    }
    Ok(geometric(beta, s))
}

fn check_beta(beta: f64) -> Result<(), LinalgError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(LinalgError::InvalidParameter(format!("beta = {beta} outside [0, 1)")));
    }
    Ok(())
}

fn geometric(beta: f64, s: u64) -> f64 {
    if beta == 0.0 {
        return 1.0;
    }
    // 1 - β^s without cancellation when β^s is close to 1.
    -(s as f64 * beta.ln()).exp_m1() / (1.0 - beta)
}

/// Spectrum of `M_t` in the eigenbasis of `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtSpectrum {
    pub base: EigenDecomposition,
    /// `ln μ_i`, attached to eigenvector i of `H`.
    pub log_mu: Vec<f64>,
    pub mu_max_log: f64,
}

/// Parameters of the `M_t` polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MtParams {
    pub eta: f64,
    pub beta: f64,
    pub tau: u64,
    pub k: u64,
}

impl MtParams {
    fn validate(&self) -> Result<(), LinalgError> {
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(LinalgError::InvalidParameter(format!("eta = {} must be >= 0", self.eta)));
        }
        check_beta(self.beta)?;
        if self.tau < 2 {
            return Err(LinalgError::InvalidParameter("tau must be >= 2".into()));
        }
        if self.k < 1 || self.k > self.tau - 1 {
            return Err(LinalgError::InvalidParameter(format!(
                "k = {} outside [1, tau-1 = {}]",
                self.k,
                self.tau - 1
            )));
        }
        Ok(())
    }
}

pub fn mt_spectrum(
    h: &SymMatrix,
    eta: f64,
    beta: f64,
    tau: u64,
    k: u64,
) -> Result<MtSpectrum, LinalgError> {
    let params = MtParams { eta, beta, tau, k };
    params.validate()?;
    mt_spectrum_from_eig(sym_eig(h)?, params)
}

/// Same as [`mt_spectrum`] but reuses an existing eigendecomposition of `H`.
pub fn mt_spectrum_from_eig(
    base: EigenDecomposition,
    params: MtParams,
) -> Result<MtSpectrum, LinalgError> {
    params.validate()?;
    let MtParams { eta, beta, tau, k } = params;
    let last = tau - 1;
    // The coefficient grows with s, so the last factor is the binding PSD check.
    let lambda_max = base.lambda_max();
    if lambda_max > 0.0 {
        let product = eta * geometric(beta, last) * lambda_max;
        if product >= 1.0 {
            return Err(LinalgError::NotPsd { s: last, product });
        }
    }
    let log_mu: Vec<f64> = base
        .eigenvalues
        .iter()
        .map(|&lambda| log_factor_sum(eta, beta, lambda, last, k))
        .collect();
    let mu_max_log = log_mu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MtSpectrum { base, log_mu, mu_max_log })
}

/// Σ_{s=1}^{last} w_s·ln(1 - η c_s λ) with w_s = 2 for s ≥ k, 1 otherwise.
fn log_factor_sum(eta: f64, beta: f64, lambda: f64, last: u64, k: u64) -> f64 {
    if eta == 0.0 || lambda == 0.0 {
        return 0.0;
    }
    let weight = |s: u64| if s >= k { 2.0 } else { 1.0 };
    // Once β^s < e^-40 the coefficient is 1/(1-β) in floating point and every
    // remaining term is identical.
    let saturate_at = if beta == 0.0 {
        1
    } else {
        (40.0 / -beta.ln()).ceil().max(1.0) as u64
    };
    let mut sum = 0.0;
    let mut s = 1;
    while s <= last && s < saturate_at {
        sum += weight(s) * (-eta * geometric(beta, s) * lambda).ln_1p();
        s += 1;
    }
    if s <= last {
        let term = (-eta * lambda / (1.0 - beta)).ln_1p();
        let remaining = last - s + 1;
        let doubled = if k <= s { remaining } else { last.saturating_sub(k - 1) };
        let single = remaining - doubled;
        sum += (single as f64 + 2.0 * doubled as f64) * term;
    }
    sum
}

/// `M_t·x = U·diag(μ)·Uᵀ·x`.
pub fn mt_apply(spec: &MtSpectrum, x: &[f64]) -> Result<ParamVector, LinalgError> {
    if x.len() != spec.base.dim() {
        return Err(LinalgError::DimensionError { expected: spec.base.dim(), got: x.len() });
    }
    let mu: Vec<f64> = spec.log_mu.iter().map(|l| l.exp()).collect();
    Ok(spec.base.apply_spectral(&mu, x))
}

/// Spectral norm of `M_t`.
pub fn mt_sigma_max(spec: &MtSpectrum) -> f64 {
    spec.mu_max_log.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum();
            }
        }
        out
    }

    /// Dense product of the 2(τ-1)-(k-1) factors, multiplied out explicitly.
    fn dense_mt(h: &SymMatrix, eta: f64, beta: f64, tau: u64, k: u64) -> Vec<f64> {
        let d = h.dim();
        let g = |s: u64| -> Vec<f64> {
            let c: f64 = (0..s).map(|j| beta.powi(j as i32)).sum();
            (0..d * d)
                .map(|p| {
                    let id = if p / d == p % d { 1.0 } else { 0.0 };
                    id - eta * c * h.entries()[p]
                })
                .collect()
        };
        let mut acc = SymMatrix::identity(d).entries().to_vec();
        for s in 1..tau {
            acc = dense_mul(&acc, &g(s), d);
        }
        for s in k..tau {
            acc = dense_mul(&acc, &g(s), d);
        }
        acc
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = SymMatrix::new(2, vec![1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_non_finite() {
        let err = SymMatrix::new(2, vec![1.0, f64::NAN, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, LinalgError::InvalidMatrix(_)));
    }

    #[test]
    fn eig_of_saddle_diag() {
        let e = sym_eig(&SymMatrix::diag(&[1.0, -0.1]).unwrap()).unwrap();
        assert_eq!(e.eigenvalues, vec![-0.1, 1.0]);
        assert_eq!(e.v_min().as_slice(), &[0.0, 1.0]);
        assert_eq!(e.eigenvectors[1].as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn eig_of_identity() {
        let e = sym_eig(&SymMatrix::identity(3)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn sign_normalization() {
        let a = SymMatrix::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]).unwrap();
        let e = sym_eig(&a).unwrap();
        for v in &e.eigenvectors {
            let first = v.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first > 0.0);
        }
    }

    #[test]
    fn gst_coefficient_values() {
        assert_eq!(gst_coefficient(0.0, 5).unwrap(), 1.0);
        assert!((gst_coefficient(0.5, 2).unwrap() - 1.5).abs() < 1e-15);
        let direct: f64 = (0..200).map(|k| 0.9f64.powi(k)).sum();
        let got = gst_coefficient(0.9, 200).unwrap();
        assert!((got - direct).abs() <= 1e-12 * direct, "{got} vs {direct}");
        assert!(gst_coefficient(1.0, 3).is_err());
        assert!(gst_coefficient(-0.1, 3).is_err());
        assert!(gst_coefficient(0.5, 0).is_err());
    }

    #[test]
    fn gst_coefficient_monotone_and_bounded() {
        for &beta in &[0.0, 0.3, 0.9, 0.999] {
            let mut prev = 0.0;
            for s in 1..2000 {
                let c = gst_coefficient(beta, s).unwrap();
                assert!(c >= prev);
                assert!(c >= 1.0 && c <= 1.0 / (1.0 - beta) * (1.0 + 1e-15));
                prev = c;
            }
        }
    }

    #[test]
    fn mt_identity_when_eta_zero() {
        let h = SymMatrix::diag(&[1.0, -0.1]).unwrap();
        let spec = mt_spectrum(&h, 0.0, 0.9, 50, 1).unwrap();
        assert!(spec.log_mu.iter().all(|&l| l == 0.0));
        assert_eq!(mt_sigma_max(&spec), 1.0);
        let x = [0.3, -2.0];
        assert_eq!(mt_apply(&spec, &x).unwrap().as_slice(), &x);
    }

    #[test]
    fn mt_small_tau_example() {
        let h = SymMatrix::diag(&[1.0, -0.1]).unwrap();
        let spec = mt_spectrum(&h, 0.1, 0.0, 2, 1).unwrap();
        let dense = dense_mt(&h, 0.1, 0.0, 2, 1);
        assert!((dense[0] - 0.81).abs() < 1e-15 && (dense[3] - 1.0201).abs() < 1e-15);
        let mu: Vec<f64> = spec.log_mu.iter().map(|l| l.exp()).collect();
        // eigenvalues ascend in H: -0.1 first
        assert!((mu[0] - 1.0201).abs() < 1e-12);
        assert!((mu[1] - 0.81).abs() < 1e-12);
        let y = mt_apply(&spec, &[1.0, 1.0]).unwrap();
        assert!((y[0] - 0.81).abs() < 1e-12 && (y[1] - 1.0201).abs() < 1e-12);
        assert!((mt_sigma_max(&spec) - 1.0201).abs() < 1e-12);
    }

    #[test]
    fn mt_rejects_non_psd_factor() {
        let h = SymMatrix::diag(&[10.0, -0.1]).unwrap();
        let err = mt_spectrum(&h, 0.05, 0.9, 50, 1).unwrap_err();
        assert!(matches!(err, LinalgError::NotPsd { .. }));
    }

    #[test]
    fn mt_rejects_bad_k() {
        let h = SymMatrix::identity(2);
        assert!(mt_spectrum(&h, 0.01, 0.5, 5, 5).is_err());
        assert!(mt_spectrum(&h, 0.01, 0.5, 5, 0).is_err());
        assert!(mt_spectrum(&h, 0.01, 0.5, 1, 1).is_err());
    }

    #[test]
    fn mt_apply_dimension_error() {
        let spec = mt_spectrum(&SymMatrix::identity(2), 0.01, 0.5, 5, 1).unwrap();
        assert!(matches!(
            mt_apply(&spec, &[1.0, 2.0, 3.0]),
            Err(LinalgError::DimensionError { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn mt_eigenvector_action() {
        let h = SymMatrix::from_rows(&[
            vec![0.5, 0.2, -0.1],
            vec![0.2, -0.3, 0.05],
            vec![-0.1, 0.05, 0.8],
        ])
        .unwrap();
        let spec = mt_spectrum(&h, 0.05, 0.6, 30, 3).unwrap();
        for (i, v) in spec.base.eigenvectors.iter().enumerate() {
            let y = mt_apply(&spec, v).unwrap();
            let mu = spec.log_mu[i].exp();
            for j in 0..3 {
                assert!((y[j] - mu * v[j]).abs() < 1e-12 * mu.max(1.0));
            }
        }
    }

    #[test]
    fn saturated_tail_matches_direct_sum() {
        // long products use the constant tail; compare with the term-by-term sum
        let (eta, beta, lambda, last, k) = (5e-5, 0.9f64, -0.1f64, 300_000u64, 7u64);
        let mut direct = 0.0;
        for s in 1..=last {
            let w = if s >= k { 2.0 } else { 1.0 };
            let c = (1.0 - beta.powi(s as i32)) / (1.0 - beta);
            direct += w * (1.0 - eta * c * lambda).ln();
        }
        let got = log_factor_sum(eta, beta, lambda, last, k);
        assert!((got - direct).abs() <= 1e-9 * direct.abs(), "{got} vs {direct}");
    }
}
