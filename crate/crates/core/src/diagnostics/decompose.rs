//! Exact split of the displacement after a boosted step.
//!
//! With `t0` a boosted step (step size `r`) followed by ordinary steps of size
//! `η`, `H = ∇²f(w_{t0})`, `θ_s = Σ_{k=0}^{s-1} β^k` and
//! `G_s = I - η·θ_s·H`, the iterates satisfy
//!
//! ```text
//! w_{t0+t} - w_{t0} = q_v + η·(q_m + q_q + q_w + q_ξ)
//! ```
//!
//! where `q_v = G_{t-1}···G_1·(-r·m_{t0})` and each of the other terms is
//! `-Σ_{s=1}^{t-1} G_{t-1}···G_{s+1}·v_s` for its own driving sequence:
//!
//! * `v_m,s = β^s·m_{t0}`
//! * `v_q,s = Σ_{k=1}^{s} β^{s-k}·(∇f(w_{t0+k}) - ∇Q(w_{t0+s}))`
//! * `v_w,s = θ_s·∇f(w_{t0})`
//! * `v_ξ,s = Σ_{k=1}^{s} β^{s-k}·ξ_{t0+k}`
//!
//! with `∇Q(w) = ∇f(w_{t0}) + H(w - w_{t0})` and `ξ = g - ∇f`. The products
//! are accumulated with the recurrence `P_s = G_s·P_{s-1} + v_s`.

use crate::linalg::{gst_coefficient, SymMatrix};
use crate::optim::{OptimError, StepInfo, Stepper};
use crate::problems::Objective;
use crate::vector::ParamVector;

use super::DiagnosticsError;

/// Iterates, momentum and stochastic gradients recorded from a boosted step onward.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementWindow {
    pub t0: u64,
    pub period: u64,
    pub eta: f64,
    pub r: f64,
    pub beta: f64,
    /// `w_{t0}, ..., w_{t0+len}`.
    pub iterates: Vec<ParamVector>,
    /// `m_{t0}`, after the update at `t0`.
    pub momentum_t0: ParamVector,
    /// `g_{t0}, ..., g_{t0+len-1}`.
    pub grads: Vec<ParamVector>,
    /// Step sizes actually used at `t0, ..., t0+len-1`.
    pub steps: Vec<f64>,
}

impl DisplacementWindow {
    /// Builds a window from consecutive steps plus the iterate after the last one.
    pub fn from_steps(
        steps: &[StepInfo],
        w_end: ParamVector,
        eta: f64,
        r: f64,
        beta: f64,
        period: u64,
    ) -> Result<Self, DiagnosticsError> {
        let first = steps
            .first()
            .ok_or_else(|| DiagnosticsError::InvalidParameter("window needs at least one step".into()))?;
        for (k, s) in steps.iter().enumerate() {
            if s.t != first.t + k as u64 {
                return Err(DiagnosticsError::InvalidParameter("steps are not consecutive".into()));
            }
        }
        let mut iterates: Vec<ParamVector> = steps.iter().map(|s| s.w.clone()).collect();
        iterates.push(w_end);
        Ok(Self {
            t0: first.t,
            period,
            eta,
            r,
            beta,
            iterates,
            momentum_t0: first.m.clone(),
            grads: steps.iter().map(|s| s.g.clone()).collect(),
            steps: steps.iter().map(|s| s.eta_used).collect(),
        })
    }

    /// Advances `stepper` by `len` steps and records them.
    pub fn capture<O: Objective + ?Sized>(
        stepper: &mut Stepper<'_, O>,
        len: usize,
    ) -> Result<Self, OptimError> {
        let cfg = stepper.config().clone();
        let boost = cfg
            .boost
            .ok_or_else(|| OptimError::InvalidConfig("window capture needs a boost schedule".into()))?;
        let steps = (0..len).map(|_| stepper.step()).collect::<Result<Vec<_>, _>>()?;
        let w_end = stepper.iterate().clone();
        Ok(Self::from_steps(&steps, w_end, cfg.eta, boost.r, cfg.beta, boost.period)?)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    fn check_alignment(&self) -> Result<(), DiagnosticsError> {
        if self.period == 0 || self.t0 % self.period != 0 {
            return Err(DiagnosticsError::MisalignedWindow(format!(
                "t0 = {} is not a multiple of {}",
                self.t0, self.period
            )));
        }
        if self.steps.first() != Some(&self.r) {
            return Err(DiagnosticsError::MisalignedWindow("first step size is not r".into()));
        }
        if let Some(k) = self.steps.iter().skip(1).position(|&s| s != self.eta) {
            return Err(DiagnosticsError::MisalignedWindow(format!(
                "step at t0 + {} is not eta",
                k + 1
            )));
        }
        Ok(())
    }
}

/// The five terms and how well they reproduce the true displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub t: usize,
    pub displacement: ParamVector,
    pub q_v: ParamVector,
    pub q_m: ParamVector,
    pub q_q: ParamVector,
    pub q_w: ParamVector,
    pub q_xi: ParamVector,
    /// `‖displacement - (q_v + η·Σq)‖`.
    pub residual_norm: f64,
}

impl Decomposition {
    pub fn reconstructed(&self, eta: f64) -> ParamVector {
        let mut out = self.q_v.clone();
        for q in [&self.q_m, &self.q_q, &self.q_w, &self.q_xi] {
            out.axpy(eta, q);
        }
        out
    }

    /// Residual relative to `max(‖displacement‖, 1)`.
    pub fn relative_residual(&self) -> f64 {
        self.residual_norm / self.displacement.norm().max(1.0)
    }
}

fn apply_g(h: &SymMatrix, coef: f64, x: &ParamVector) -> Result<ParamVector, DiagnosticsError> {
    let hx = h.mul_vec(x)?;
    let mut out = x.clone();
    out.axpy(-coef, &hx);
    Ok(out)
}

/// Decomposes `w_{t0+t} - w_{t0}` for `1 ≤ t ≤ window.len()`.
pub fn decompose_displacement<O: Objective + ?Sized>(
    objective: &O,
    window: &DisplacementWindow,
    t: usize,
) -> Result<Decomposition, DiagnosticsError> {
    window.check_alignment()?;
    if t < 1 || t > window.len() {
        return Err(DiagnosticsError::InvalidParameter(format!(
            "t = {t} outside 1..={}",
            window.len()
        )));
    }
    let d = objective.dim();
    let w0 = &window.iterates[0];
    let h = objective.full_hessian(w0)?;
    let grad0 = objective.full_grad(w0)?;
    let (eta, beta) = (window.eta, window.beta);

    let mut p_v = window.momentum_t0.scaled(-window.r);
    let mut p_m = ParamVector::zeros(d);
    let mut p_q = ParamVector::zeros(d);
    let mut p_w = ParamVector::zeros(d);
    let mut p_xi = ParamVector::zeros(d);
    // Running β-weighted sums of ∇f(w_{t0+k}) and ξ_{t0+k}, k = 1..s.
    let mut sum_grad = ParamVector::zeros(d);
    let mut sum_xi = ParamVector::zeros(d);
    let mut beta_pow = 1.0;

    for s in 1..t {
        let ws = &window.iterates[s];
        let grad_s = objective.full_grad(ws)?;
        let xi_s = window.grads[s].sub(&grad_s);
        sum_grad.scale(beta);
        sum_grad.axpy(1.0, &grad_s);
        sum_xi.scale(beta);
        sum_xi.axpy(1.0, &xi_s);
        beta_pow *= beta;

        let theta = gst_coefficient(beta, s as u64)?;
        let coef = eta * theta;
        let mut grad_q = h.mul_vec(&ws.sub(w0))?;
        grad_q.axpy(1.0, &grad0);

        let mut v_q = sum_grad.clone();
        v_q.axpy(-theta, &grad_q);

        p_v = apply_g(&h, coef, &p_v)?;
        p_m = apply_g(&h, coef, &p_m)?;
        p_m.axpy(beta_pow, &window.momentum_t0);
        p_q = apply_g(&h, coef, &p_q)?;
        p_q.axpy(1.0, &v_q);
        p_w = apply_g(&h, coef, &p_w)?;
        p_w.axpy(theta, &grad0);
        p_xi = apply_g(&h, coef, &p_xi)?;
        p_xi.axpy(1.0, &sum_xi);
    }

    let mut out = Decomposition {
        t,
        displacement: window.iterates[t].sub(w0),
        q_v: p_v,
        q_m: p_m.scaled(-1.0),
        q_q: p_q.scaled(-1.0),
        q_w: p_w.scaled(-1.0),
        q_xi: p_xi.scaled(-1.0),
        residual_norm: 0.0,
    };
    out.residual_norm = out.displacement.sub(&out.reconstructed(eta)).norm();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::{BoostSchedule, InitSpec, RunConfig};
    use crate::problems::{generate_phase_retrieval, generate_saddle_quadratic, SaddleQuadraticInstance};

    fn window_for<O: Objective>(obj: &O, beta: f64, len: usize, skip: u64) -> DisplacementWindow {
        let mut cfg = RunConfig::new(1e-4, beta, 1000, 4);
        cfg.boost = Some(BoostSchedule { r: 5e-4, period: 20 });
        cfg.w0 = InitSpec::Gaussian { scale: 0.3 };
        let mut stepper = Stepper::new(obj, &cfg).unwrap();
        for _ in 0..skip {
            stepper.step().unwrap();
        }
        DisplacementWindow::capture(&mut stepper, len).unwrap()
    }

    #[test]
    fn single_step_is_the_boost() {
        let obj = generate_phase_retrieval(2, 10, 200).unwrap();
        let win = window_for(&obj, 0.9, 5, 20);
        let dec = decompose_displacement(&obj, &win, 1).unwrap();
        assert_eq!(dec.q_v, win.momentum_t0.scaled(-5e-4));
        for q in [&dec.q_m, &dec.q_q, &dec.q_w, &dec.q_xi] {
            assert!(q.iter().all(|&x| x == 0.0));
        }
        assert!(dec.relative_residual() <= 1e-14);
    }

    #[test]
    fn reconstructs_displacement() {
        let obj = generate_phase_retrieval(5, 10, 200).unwrap();
        for beta in [0.0, 0.5, 0.9] {
            let win = window_for(&obj, beta, 15, 40);
            for t in 1..=15 {
                let dec = decompose_displacement(&obj, &win, t).unwrap();
                assert!(dec.relative_residual() <= 1e-10, "beta {beta} t {t}: {}", dec.relative_residual());
            }
        }
    }

    fn quadratic() -> SaddleQuadraticInstance {
        generate_saddle_quadratic(7, 10).unwrap().with_penalty(0.0)
    }

    #[test]
    fn quadratic_model_term_vanishes_without_momentum() {
        let obj = quadratic();
        let win = window_for(&obj, 0.0, 10, 0);
        let dec = decompose_displacement(&obj, &win, 10).unwrap();
        assert!(dec.q_q.norm() <= 1e-14, "{}", dec.q_q.norm());
        assert!(dec.relative_residual() <= 1e-12);
    }

    #[test]
    fn quadratic_model_term_with_momentum_matches_closed_form() {
        // For a quadratic, ∇f(w_k) - ∇Q(w_s) = H(w_k - w_s).
        let obj = quadratic();
        let beta = 0.6;
        let win = window_for(&obj, beta, 10, 0);
        let t = 10;
        let h = obj.full_hessian(&win.iterates[0]).unwrap();
        let mut expected = ParamVector::zeros(2);
        for s in 1..t {
            let mut v = ParamVector::zeros(2);
            for k in 1..=s {
                let diff = win.iterates[k].sub(&win.iterates[s]);
                v.axpy(beta.powi((s - k) as i32), &h.mul_vec(&diff).unwrap());
            }
            for j in s + 1..t {
                let theta = (1.0 - beta.powi(j as i32)) / (1.0 - beta);
                v = v.sub(&h.mul_vec(&v).unwrap().scaled(win.eta * theta));
            }
            expected.axpy(-1.0, &v);
        }
        let dec = decompose_displacement(&obj, &win, t).unwrap();
        assert!(dec.q_q.sub(&expected).norm() <= 1e-12 * expected.norm().max(1e-12));
    }

    #[test]
    fn rejects_misaligned_windows() {
        let obj = generate_phase_retrieval(2, 10, 200).unwrap();
        let win = window_for(&obj, 0.9, 5, 3);
        assert!(matches!(
            decompose_displacement(&obj, &win, 2),
            Err(DiagnosticsError::MisalignedWindow(_))
        ));

        let mut win = window_for(&obj, 0.9, 5, 0);
        win.steps[2] = 5e-4;
        assert!(matches!(
            decompose_displacement(&obj, &win, 2),
            Err(DiagnosticsError::MisalignedWindow(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_t() {
        let obj = generate_phase_retrieval(2, 10, 200).unwrap();
        let win = window_for(&obj, 0.9, 5, 0);
        assert!(decompose_displacement(&obj, &win, 0).is_err());
        assert!(decompose_displacement(&obj, &win, 6).is_err());
    }
}
