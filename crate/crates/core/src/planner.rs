//! Parameter recipe for the boosted-step optimizer.
//!
//! Given problem constants (smoothness, noise, momentum and alignment bounds)
//! the planner emits `r`, `η`, the decrease threshold `F_thred`, the period
//! `T_thred` and the total budget `T`, together with a report of every
//! inequality the recipe relies on. Free constants are taken at their upper
//! bounds and the remaining inequalities are checked, never silently fixed.

use std::fmt;

use thiserror::Error;

pub const C0: f64 = 1.0 / 1152.0;
pub const C1: f64 = C0 / 24.0;
pub const C2: f64 = C0 / 576.0;

/// Maximum number of times `η` is halved to satisfy `η²·T_thred ≤ r²`.
pub const MAX_HALVINGS: u32 = 64;

/// Slack on `≤` comparisons, so that quantities chosen at their bound pass.
const REL_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid constant: {0}")]
    InvalidConstant(String),
    #[error("infeasible: {constraint} fails")]
    Infeasible { constraint: String, result: Box<PlannerResult> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConstants {
    /// Gradient Lipschitz constant.
    pub l: f64,
    /// Hessian Lipschitz constant.
    pub rho: f64,
    /// Bound on the stochastic gradient noise.
    pub sigma2: f64,
    /// Bound on the momentum norm.
    pub c_m: f64,
    /// Alignment (APCG) constant.
    pub c_prime: f64,
    /// Curvature-exploitation (GrACE) constant; values below one are raised to one.
    pub c_h: f64,
    /// Correlated-negative-curvature parameter.
    pub gamma: f64,
    pub delta: f64,
    pub eps: f64,
    pub beta: f64,
    /// Upper bound on `f(w0) - min f`.
    pub delta_f: f64,
    /// Constant in front of the period bound.
    pub c_t: f64,
}

impl Default for PlannerConstants {
    fn default() -> Self {
        Self {
            l: 1.0,
            rho: 1.0,
            sigma2: 1.0,
            c_m: 1.0,
            c_prime: 1.0,
            c_h: 1.0,
            gamma: 1.0,
            delta: 0.1,
            eps: 0.1,
            beta: 0.0,
            delta_f: 1.0,
            c_t: 1.0,
        }
    }
}

impl PlannerConstants {
    pub fn validate(&self) -> Result<(), PlanError> {
        let bad = |msg: String| Err(PlanError::InvalidConstant(msg));
        for (name, v) in [
            ("L", self.l),
            ("rho", self.rho),
            ("sigma2", self.sigma2),
            ("c_m", self.c_m),
            ("c_prime", self.c_prime),
        ] {
            if !(v >= 1.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be >= 1"));
            }
        }
        if !(self.c_h >= 0.0 && self.c_h.is_finite()) {
            return bad(format!("c_h = {} must be >= 0", self.c_h));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma = {} must be > 0", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta = {} must be in (0, 1]", self.delta));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps = {} must be in (0, 1]", self.eps));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return bad(format!("beta = {} must be in [0, 1)", self.beta));
        }
        if !(self.delta_f > 0.0 && self.delta_f.is_finite()) {
            return bad(format!("delta_f = {} must be > 0", self.delta_f));
        }
        if !(self.c_t > 0.0 && self.c_t.is_finite()) {
            return bad(format!("c_T = {} must be > 0", self.c_t));
        }
        Ok(())
    }

    fn c_h_eff(&self) -> f64 {
        self.c_h.max(1.0)
    }

    pub fn c_r(&self) -> f64 {
        C0 / (self.c_m.powi(3) * self.rho * self.l * self.sigma2 * self.c_h_eff())
    }

    pub fn c_eta(&self) -> f64 {
        C1 / (self.c_m.powi(5) * self.rho * self.l.powi(2) * self.sigma2 * self.c_prime * self.c_h_eff())
    }

    pub fn c_f(&self) -> f64 {
        C2 / (self.c_m.powi(4) * self.rho.powi(2) * self.l * self.sigma2.powi(2) * self.c_h_eff())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Pending,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::Pending => "pending",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Le,
    Ge,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: &'static str,
    pub text: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub status: Status,
}

impl Constraint {
    fn eval(name: &'static str, text: &'static str, lhs: f64, cmp: Cmp, rhs: f64) -> Self {
        let ok = match cmp {
            Cmp::Le => lhs <= rhs + REL_SLACK * rhs.abs(),
            Cmp::Ge => lhs + REL_SLACK * lhs.abs() >= rhs,
            Cmp::Gt => lhs > rhs,
        };
        let status = if ok { Status::Pass } else { Status::Fail };
        Self { name, text, lhs, rhs, status }
    }

    fn pending(name: &'static str, text: &'static str) -> Self {
        Self { name, text, lhs: f64::NAN, rhs: f64::NAN, status: Status::Pending }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerResult {
    pub r: f64,
    /// Step size after halving.
    pub eta: f64,
    /// Step size straight from the recipe, before any halving.
    pub eta_table: f64,
    pub halvings: u32,
    pub f_thred: f64,
    /// Integral; stored as a float because realistic values exceed `u64`.
    pub t_thred: f64,
    pub t_total: f64,
    /// Number of periods, `floor(T / T_thred)`.
    pub periods: f64,
    pub report: Vec<Constraint>,
}

impl PlannerResult {
    pub fn feasible(&self) -> bool {
        self.report.iter().all(|c| c.status == Status::Pass)
    }

    pub fn first_failure(&self) -> Option<&Constraint> {
        self.report.iter().find(|c| c.status != Status::Pass)
    }
}

/// The three momentum constraints that depend only on the constants, followed
/// by the three that need `η` and `T_thred` (left pending).
pub fn check_beta_constraints(c: &PlannerConstants) -> Result<Vec<Constraint>, PlanError> {
    c.validate()?;
    let one_m = 1.0 - c.beta;
    Ok(vec![
        Constraint::eval("beta_l", "L(1-beta)^3 > 1", c.l * one_m.powi(3), Cmp::Gt, 1.0),
        Constraint::eval("beta_sigma", "sigma^2(1-beta)^3 > 1", c.sigma2 * one_m.powi(3), Cmp::Gt, 1.0),
        Constraint::eval("beta_c_prime", "c'(1-beta)^2 > 1", c.c_prime * one_m.powi(2), Cmp::Gt, 1.0),
        Constraint::pending("beta_eta_l", "eta <= (1-beta)/L"),
        Constraint::pending("beta_eta_eps", "eta <= (1-beta)/eps"),
        Constraint::pending("beta_period", "T_thred >= 1 + 2beta/(1-beta)"),
    ])
}

fn period_log_term(c: &PlannerConstants) -> f64 {
    let one_m = 1.0 - c.beta;
    (c.l * c.c_m * c.sigma2 * c.rho * c.c_prime * c.c_h_eff() / (one_m * c.delta * c.gamma * c.eps)).ln()
}

/// Real-valued period bound `c_T(1-β)/(ηε)·ln(Lc_mσ²ρc'c_h/((1-β)δγε))`.
pub fn t_thred_bound(c: &PlannerConstants, eta: f64) -> f64 {
    c.c_t * (1.0 - c.beta) / (eta * c.eps) * period_log_term(c)
}

/// The period for a given step size: the bound rounded up, at least one.
pub fn t_thred_for(c: &PlannerConstants, eta: f64) -> f64 {
    t_thred_bound(c, eta).ceil().max(1.0)
}

pub fn plan_parameters(c: &PlannerConstants) -> Result<PlannerResult, PlanError> {
    let mut report = check_beta_constraints(c)?;
    let c_h = c.c_h_eff();
    let one_m = 1.0 - c.beta;
    let (c_r, c_eta, c_f) = (c.c_r(), c.c_eta(), c.c_f());

    let r = c.delta * c.gamma * c.eps.powi(2) * c_r;
    let eta_table = c.delta.powi(2) * c.gamma.powi(2) * c.eps.powi(5) * c_eta;
    let f_thred = c.delta * c.gamma.powi(2) * c.eps.powi(4) * c_f;

    let mut eta = eta_table;
    let mut t_thred = t_thred_for(c, eta);
    let mut halvings = 0;
    while eta * eta * t_thred > r * r && halvings < MAX_HALVINGS {
        eta /= 2.0;
        t_thred = t_thred_for(c, eta);
        halvings += 1;
    }
    let t_total = (2.0 * t_thred * c.delta_f / (c.delta * f_thred)).ceil();
    let periods = (t_total / t_thred).floor();

    let m3 = c.c_m.powi(3);
    let table = [
        Constraint::eval(
            "c_r_upper",
            "c_r <= c0/(c_m^3 rho L sigma^2 c_h)",
            c_r,
            Cmp::Le,
            C0 / (m3 * c.rho * c.l * c.sigma2 * c_h),
        ),
        Constraint::eval(
            "c_r_lower_c_prime",
            "c0/(c_m^3 rho L sigma^2 c' (1-beta)^2 c_h) <= c_r",
            C0 / (m3 * c.rho * c.l * c.sigma2 * c.c_prime * one_m.powi(2) * c_h),
            Cmp::Le,
            c_r,
        ),
        Constraint::eval(
            "c_r_lower_sigma",
            "c0/(c_m^3 rho L sigma^4 (1-beta)^3 c_h) <= c_r",
            C0 / (m3 * c.rho * c.l * c.sigma2.powi(2) * one_m.powi(3) * c_h),
            Cmp::Le,
            c_r,
        ),
        Constraint::eval(
            "r_bound",
            "r <= sqrt(delta F_thred / (8 c_h))",
            r,
            Cmp::Le,
            (c.delta * f_thred / (8.0 * c_h)).sqrt(),
        ),
        Constraint::eval(
            "c_eta_upper",
            "c_eta <= c1/(c_m^5 rho L^2 sigma^2 c' c_h)",
            c_eta,
            Cmp::Le,
            C1 / (c.c_m.powi(5) * c.rho * c.l.powi(2) * c.sigma2 * c.c_prime * c_h),
        ),
        Constraint::eval("eta_sq_period", "eta^2 T_thred <= r^2", eta * eta * t_thred, Cmp::Le, r * r),
        Constraint::eval("eta_le_r", "eta <= r", eta, Cmp::Le, r),
        Constraint::eval(
            "c_f_upper",
            "c_F <= c2/(c_m^4 rho^2 L sigma^4 c_h)",
            c_f,
            Cmp::Le,
            C2 / (c.c_m.powi(4) * c.rho.powi(2) * c.l * c.sigma2.powi(2) * c_h),
        ),
        Constraint::eval(
            "c_f_lower",
            "c_F >= 8 c0^2/(c_m^6 rho^2 L^2 sigma^4 c_h)",
            c_f,
            Cmp::Ge,
            8.0 * C0 * C0 / (c.c_m.powi(6) * c.rho.powi(2) * c.l.powi(2) * c.sigma2.powi(2) * c_h),
        ),
        Constraint::eval("f_thred_bound", "F_thred <= eps^2 r / 4", f_thred, Cmp::Le, c.eps.powi(2) * r / 4.0),
        Constraint::eval(
            "t_thred_bound",
            "T_thred >= c_T (1-beta)/(eta eps) log(L c_m sigma^2 rho c' c_h / ((1-beta) delta gamma eps))",
            t_thred,
            Cmp::Ge,
            t_thred_bound(c, eta),
        ),
    ];

    report[3] = Constraint::eval("beta_eta_l", "eta <= (1-beta)/L", eta, Cmp::Le, one_m / c.l);
    report[4] = Constraint::eval("beta_eta_eps", "eta <= (1-beta)/eps", eta, Cmp::Le, one_m / c.eps);
    report[5] = Constraint::eval(
        "beta_period",
        "T_thred >= 1 + 2beta/(1-beta)",
        t_thred,
        Cmp::Ge,
        1.0 + 2.0 * c.beta / one_m,
    );
    let mut full: Vec<Constraint> = table.into_iter().collect();
    full.extend(report);

    let result = PlannerResult {
        r,
        eta,
        eta_table,
        halvings,
        f_thred,
        t_thred,
        t_total,
        periods,
        report: full,
    };
    match result.first_failure() {
        None => Ok(result),
        Some(failed) => Err(PlanError::Infeasible {
            constraint: failed.name.to_string(),
            result: Box::new(result),
        }),
    }
}
