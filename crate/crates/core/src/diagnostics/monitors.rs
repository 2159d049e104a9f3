//! Per-iterate property monitors.
//!
//! All values are the realized quantities at one iterate; the conditional
//! expectations in the property definitions are estimated by aggregating
//! these over a trajectory.

use crate::linalg::{mt_spectrum_from_eig, sym_eig, LinalgError, MtParams, MtSpectrum, SymMatrix};
use crate::problems::{Objective, ProblemId};
use crate::vector::{dot, norm, ParamVector};

use super::DiagnosticsError;

/// Gradient norms at or below this are treated as zero by the monitors.
pub const GRAD_FLOOR: f64 = 1e-12;

/// Tolerance on ‖v‖ = 1 for the curvature projection.
const UNIT_TOL: f64 = 1e-9;

fn check_dims(expected: usize, got: &[&[f64]]) -> Result<(), DiagnosticsError> {
    for v in got {
        if v.len() != expected {
            return Err(DiagnosticsError::DimensionError { expected, got: v.len() });
        }
    }
    Ok(())
}

/// `⟨∇f, m - g⟩ / ‖∇f‖²`; the alignment property asks for this to be ≥ -1/2.
pub fn apag_ratio(grad: &[f64], m: &[f64], g: &[f64]) -> Result<f64, DiagnosticsError> {
    check_dims(grad.len(), &[m, g])?;
    let gn2 = dot(grad, grad);
    if gn2 == 0.0 {
        return Err(DiagnosticsError::ZeroGradient);
    }
    let num: f64 = grad.iter().zip(m.iter().zip(g)).map(|(d, (mi, gi))| d * (mi - gi)).sum();
    Ok(num / gn2)
}

/// `⟨∇f, M_t m⟩ / (η·σ_max(M_t)·‖∇f‖²)`, evaluated with eigenvalue ratios
/// `μ_i / μ_max` so that long products never leave floating-point range.
pub fn apcg_ratio(
    grad: &[f64],
    m: &[f64],
    spec: &MtSpectrum,
    eta: f64,
) -> Result<f64, DiagnosticsError> {
    check_dims(spec.base.dim(), &[grad, m])?;
    let gn2 = dot(grad, grad);
    if gn2 == 0.0 {
        return Err(DiagnosticsError::ZeroGradient);
    }
    let pg = spec.base.project(grad);
    let pm = spec.base.project(m);
    let num: f64 = spec
        .log_mu
        .iter()
        .zip(pg.iter().zip(&pm))
        .map(|(l, (a, b))| (l - spec.mu_max_log).exp() * a * b)
        .sum();
    Ok(num / (eta * gn2))
}

/// `(η⟨∇f, g - m⟩ + (η²/2)·mᵀHm) / η²`
pub fn grace_value(
    grad: &[f64],
    g: &[f64],
    m: &[f64],
    h: &SymMatrix,
    eta: f64,
) -> Result<f64, DiagnosticsError> {
    check_dims(h.dim(), &[grad, g, m])?;
    if !(eta > 0.0) {
        return Err(DiagnosticsError::InvalidParameter(format!("eta = {eta} must be > 0")));
    }
    let align: f64 = grad.iter().zip(g.iter().zip(m)).map(|(d, (gi, mi))| d * (gi - mi)).sum();
    let curvature = h.quad_form(m)?;
    Ok((eta * align + 0.5 * eta * eta * curvature) / (eta * eta))
}

/// `⟨m, v⟩²` for a unit eigenvector `v`.
pub fn cnc_projection(m: &[f64], v_min: &[f64]) -> Result<f64, DiagnosticsError> {
    check_dims(m.len(), &[v_min])?;
    let vn = norm(v_min);
    if (vn - 1.0).abs() > UNIT_TOL {
        return Err(DiagnosticsError::InvalidEigenvector(vn));
    }
    let p = dot(m, v_min);
    Ok(p * p)
}

/// Which of the three cases an iterate falls into for accuracy `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionLabel {
    LargeGradient,
    SaddleRegion,
    SecondOrderStationary,
}

impl RegionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RegionLabel::LargeGradient => "large_gradient",
            RegionLabel::SaddleRegion => "saddle_region",
            RegionLabel::SecondOrderStationary => "second_order_stationary",
        }
    }
}

/// `‖∇f‖ = ε` counts as small, `λ_min = -ε` counts as a saddle.
pub fn classify(grad_norm: f64, lambda_min: f64, eps: f64) -> RegionLabel {
    if grad_norm > eps {
        RegionLabel::LargeGradient
    } else if lambda_min <= -eps {
        RegionLabel::SaddleRegion
    } else {
        RegionLabel::SecondOrderStationary
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApagMonitor {
    /// Only report when ‖∇f‖ is at least this large.
    pub min_grad: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApcgMonitor {
    pub tau: u64,
    pub k: u64,
    /// Report only at saddle-region iterates.
    pub saddle_only: bool,
}

/// Which monitors fire, and how often.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorConfig {
    pub stride: u64,
    /// Accuracy used for region labels.
    pub eps: f64,
    pub apag: Option<ApagMonitor>,
    pub apcg: Option<ApcgMonitor>,
    pub grace: bool,
    pub cnc: bool,
    /// Report λ_min (and the region label) at monitored iterates.
    pub hessian: bool,
}

impl MonitorConfig {
    /// No monitors at all.
    pub fn off() -> Self {
        Self { stride: 1, eps: 0.05, apag: None, apcg: None, grace: false, cnc: false, hessian: false }
    }

    /// All monitors on, with per-problem defaults for stride and reporting rules.
    pub fn defaults_for(problem: ProblemId, t_thred: Option<u64>) -> Self {
        let (stride, min_grad, saddle_only) = match problem {
            ProblemId::SaddleQuadratic => (1, 0.02, true),
            ProblemId::PhaseRetrieval => (100, GRAD_FLOOR, false),
        };
        Self {
            stride,
            eps: 0.05,
            apag: Some(ApagMonitor { min_grad }),
            apcg: Some(ApcgMonitor { tau: t_thred.unwrap_or(500).max(2), k: 1, saddle_only }),
            grace: true,
            cnc: true,
            hessian: true,
        }
    }

    pub fn needs_hessian(&self) -> bool {
        self.hessian || self.apcg.is_some() || self.grace || self.cnc
    }

    pub fn any(&self) -> bool {
        self.needs_hessian() || self.apag.is_some()
    }
}

/// APCG outcome; the PSD precondition can fail when η is too large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ApcgValue {
    Ratio(f64),
    NotPsd,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitorValues {
    pub lambda_min: Option<f64>,
    pub region: Option<RegionLabel>,
    pub apag: Option<f64>,
    pub apcg: Option<ApcgValue>,
    pub grace: Option<f64>,
    pub cnc_proj: Option<f64>,
}

/// Evaluates the configured monitors at `w_t` given `∇f(w_t)`, `g_t`, `m_t`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_monitors<O: Objective + ?Sized>(
    objective: &O,
    cfg: &MonitorConfig,
    w: &[f64],
    grad: &ParamVector,
    g: &[f64],
    m: &[f64],
    eta: f64,
    beta: f64,
) -> Result<MonitorValues, DiagnosticsError> {
    let mut out = MonitorValues::default();
    let grad_norm = grad.norm();
    if let Some(apag) = cfg.apag {
        if grad_norm > GRAD_FLOOR && grad_norm >= apag.min_grad {
            out.apag = Some(apag_ratio(grad, m, g)?);
        }
    }
    if !cfg.needs_hessian() {
        return Ok(out);
    }
    let h = objective.full_hessian(w)?;
    let eig = sym_eig(&h)?;
    let lambda_min = eig.lambda_min();
    let region = classify(grad_norm, lambda_min, cfg.eps);
    if cfg.hessian || cfg.apcg.is_some() {
        out.lambda_min = Some(lambda_min);
        out.region = Some(region);
    }
    if cfg.grace {
        out.grace = Some(grace_value(grad, g, m, &h, eta)?);
    }
    if cfg.cnc {
        out.cnc_proj = Some(cnc_projection(m, eig.v_min())?);
    }
    if let Some(apcg) = cfg.apcg {
        let wanted = !apcg.saddle_only || region == RegionLabel::SaddleRegion;
        if wanted && grad_norm > GRAD_FLOOR {
            let params = MtParams { eta, beta, tau: apcg.tau, k: apcg.k };
            out.apcg = Some(match mt_spectrum_from_eig(eig, params) {
                Ok(spec) => ApcgValue::Ratio(apcg_ratio(grad, m, &spec, eta)?),
                Err(LinalgError::NotPsd { .. }) => ApcgValue::NotPsd,
                Err(e) => return Err(e.into()),
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mt_spectrum;

    #[test]
    fn apag_cases() {
        assert_eq!(apag_ratio(&[1.0, 2.0], &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(apag_ratio(&[1.0, 0.0], &[0.0, 5.0], &[0.0, 0.0]).unwrap(), 0.0);
        let v = apag_ratio(&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(v, -1.0);
        assert!(v < -0.5);
        assert_eq!(apag_ratio(&[0.0, 0.0], &[1.0, 0.0], &[0.0, 0.0]), Err(DiagnosticsError::ZeroGradient));
    }

    #[test]
    fn apcg_identity_m() {
        let h = SymMatrix::diag(&[1.0, -0.1]).unwrap();
        let spec = mt_spectrum(&h, 0.0, 0.5, 10, 1).unwrap();
        let v = apcg_ratio(&[1.0, 0.0], &[1.0, 0.0], &spec, 0.1).unwrap();
        assert!((v - 10.0).abs() < 1e-12);
        assert_eq!(apcg_ratio(&[1.0, 0.0], &[0.0, 3.0], &spec, 0.1).unwrap(), 0.0);
        assert_eq!(apcg_ratio(&[0.0, 0.0], &[0.0, 3.0], &spec, 0.1), Err(DiagnosticsError::ZeroGradient));
    }

    #[test]
    fn grace_cases() {
        let zero = SymMatrix::zeros(2);
        assert_eq!(grace_value(&[1.0, 2.0], &[0.3, 0.1], &[0.3, 0.1], &zero, 0.1).unwrap(), 0.0);
        let h = SymMatrix::diag(&[1.0, -0.1]).unwrap();
        assert_eq!(grace_value(&[1.0, 2.0], &[0.0, 0.0], &[0.0, 0.0], &h, 0.1).unwrap(), 0.0);
        // independent arithmetic: ⟨(1,0),(1,-1)⟩ = 1, mᵀHm = -0.1
        let expected = (0.1 * 1.0 + 0.5 * 0.01 * -0.1) / 0.01;
        let v = grace_value(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &h, 0.1).unwrap();
        assert!((v - expected).abs() < 1e-12 && (v - 9.95).abs() < 1e-12, "{v}");
        assert!(grace_value(&[1.0, 0.0], &[1.0, 0.0], &[0.0, 1.0], &h, 0.0).is_err());
    }

    #[test]
    fn cnc_cases() {
        let v = [0.6, 0.8];
        assert!((cnc_projection(&[1.2, 1.6], &v).unwrap() - 4.0).abs() < 1e-12);
        assert!(cnc_projection(&[0.8, -0.6], &v).unwrap().abs() < 1e-30);
        let m = [0.37, -1.9];
        assert_eq!(cnc_projection(&m, &v).unwrap(), cnc_projection(&m, &[-0.6, -0.8]).unwrap());
        assert!(matches!(cnc_projection(&m, &[1.0, 1.0]), Err(DiagnosticsError::InvalidEigenvector(_))));
    }

    #[test]
    fn classify_cases_and_boundaries() {
        let eps = 0.1;
        assert_eq!(classify(0.2, -5.0, eps), RegionLabel::LargeGradient);
        assert_eq!(classify(0.05, -0.2, eps), RegionLabel::SaddleRegion);
        assert_eq!(classify(0.05, 0.0, eps), RegionLabel::SecondOrderStationary);
        assert_eq!(classify(eps, 1.0, eps), RegionLabel::SecondOrderStationary);
        assert_eq!(classify(eps, -eps, eps), RegionLabel::SaddleRegion);
    }

    #[test]
    fn classify_is_total() {
        use crate::rng::{SeededRng, Stream};
        let mut rng = SeededRng::new(5, Stream::Dataset);
        for _ in 0..10_000 {
            let g = rng.uniform() * 2.0;
            let l = rng.normal();
            let e = rng.uniform() + 1e-3;
            let label = classify(g, l, e);
            let large = g > e;
            let saddle = !large && l <= -e;
            let sosp = !large && l > -e;
            assert_eq!(
                [large, saddle, sosp].iter().filter(|x| **x).count(),
                1
            );
            match label {
                RegionLabel::LargeGradient => assert!(large),
                RegionLabel::SaddleRegion => assert!(saddle),
                RegionLabel::SecondOrderStationary => assert!(sosp),
            }
        }
    }
}
