//! SGD with stochastic heavy-ball momentum.
//!
//! Each iteration draws `g_t = ∇f(w_t; ξ_t)`, updates `m_t = β·m_{t-1} + g_t`
//! (with `m_{-1} = 0`) and then steps `w_{t+1} = w_t - η̂·m_t`. Without a
//! boost schedule `η̂ = η` always; with one, `η̂ = r` whenever
//! `t mod period == 0`.

use thiserror::Error;

use crate::diagnostics::{evaluate_monitors, ApcgValue, DiagnosticsError, MonitorConfig, RegionLabel};
use crate::problems::{relative_distance, Objective, ProblemError, StochasticSample};
use crate::rng::{SeededRng, Stream};
use crate::vector::ParamVector;

/// Iterates with a norm above this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionError { expected: usize, got: usize },
    #[error("iterate diverged after t = {last_finite_t}")]
    Diverged { last_finite_t: u64 },
    #[error("no snapshots to select from")]
    NoSnapshots,
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
}

/// Running momentum `m_t` and the iteration counter.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumState {
    pub m: ParamVector,
    pub beta: f64,
    pub t: u64,
}

impl MomentumState {
    pub fn new(d: usize, beta: f64) -> Result<Self, OptimError> {
        check_beta(beta)?;
        Ok(Self { m: ParamVector::zeros(d), beta, t: 0 })
    }

    /// `m ← β·m + g`, no dampening.
    pub fn update(&mut self, g: &[f64]) -> Result<(), OptimError> {
        if g.len() != self.m.dim() {
            return Err(OptimError::DimensionError { expected: self.m.dim(), got: g.len() });
        }
        for (mi, gi) in self.m.iter_mut().zip(g) {
            *mi = self.beta * *mi + gi;
        }
        self.t += 1;
        Ok(())
    }
}

pub fn momentum_update(state: &MomentumState, g: &[f64]) -> Result<MomentumState, OptimError> {
    let mut next = state.clone();
    next.update(g)?;
    Ok(next)
}

fn check_beta(beta: f64) -> Result<(), OptimError> {
    if !(0.0..1.0).contains(&beta) {
        return Err(OptimError::InvalidConfig(format!("beta = {beta} outside [0, 1)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Zero,
    /// `w0 ~ N(0, scale²·I)`, drawn from the run seed.
    Gaussian { scale: f64 },
    Explicit(ParamVector),
}

/// Periodic boosted step: `r` at every multiple of `period`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostSchedule {
    pub r: f64,
    pub period: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub eta: f64,
    pub beta: f64,
    /// `None` runs the constant-step optimizer.
    pub boost: Option<BoostSchedule>,
    pub iterations: u64,
    pub w0: InitSpec,
    pub seed: u64,
    pub batch_size: usize,
    pub monitors: MonitorConfig,
}

impl RunConfig {
    pub fn new(eta: f64, beta: f64, iterations: u64, seed: u64) -> Self {
        Self {
            eta,
            beta,
            boost: None,
            iterations,
            w0: InitSpec::Zero,
            seed,
            batch_size: 1,
            monitors: MonitorConfig::off(),
        }
    }

    pub fn validate(&self) -> Result<(), OptimError> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(OptimError::InvalidConfig(format!("eta = {} must be > 0", self.eta)));
        }
        check_beta(self.beta)?;
        if let Some(b) = self.boost {
            if !(b.r >= self.eta && b.r.is_finite()) {
                return Err(OptimError::InvalidConfig(format!("r = {} must be >= eta", b.r)));
            }
            if b.period < 1 {
                return Err(OptimError::InvalidConfig("boost period must be >= 1".into()));
            }
        }
        if self.batch_size < 1 {
            return Err(OptimError::InvalidConfig("batch size must be >= 1".into()));
        }
        if self.monitors.stride < 1 {
            return Err(OptimError::InvalidConfig("monitor stride must be >= 1".into()));
        }
        if !(self.monitors.eps > 0.0) {
            return Err(OptimError::InvalidConfig("monitor eps must be > 0".into()));
        }
        if let InitSpec::Gaussian { scale } = self.w0 {
            if !(scale >= 0.0 && scale.is_finite()) {
                return Err(OptimError::InvalidConfig(format!("w0 scale = {scale} must be >= 0")));
            }
        }
        Ok(())
    }

    pub fn initial_point(&self, d: usize) -> Result<ParamVector, OptimError> {
        match &self.w0 {
            InitSpec::Zero => Ok(ParamVector::zeros(d)),
            InitSpec::Gaussian { scale } => {
                let mut rng = SeededRng::new(self.seed, Stream::InitialPoint);
                Ok((0..d).map(|_| scale * rng.normal()).collect())
            }
            InitSpec::Explicit(w) => {
                if w.dim() != d {
                    return Err(OptimError::DimensionError { expected: d, got: w.dim() });
                }
                if !w.is_finite() {
                    return Err(OptimError::InvalidConfig("w0 is not finite".into()));
                }
                Ok(w.clone())
            }
        }
    }
}

/// `r` if `t mod period == 0` under a boost schedule, else `η`.
pub fn step_size_for(t: u64, cfg: &RunConfig) -> f64 {
    match cfg.boost {
        Some(b) if t % b.period == 0 => b.r,
        _ => cfg.eta,
    }
}

/// Everything that happened during one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub t: u64,
    /// `w_t`, the iterate the gradient was taken at.
    pub w: ParamVector,
    pub sample: StochasticSample,
    pub g: ParamVector,
    /// `m_t`, after the update.
    pub m: ParamVector,
    pub eta_used: f64,
}

/// Single-iteration driver; [`run`] is a loop over this plus monitoring.
pub struct Stepper<'a, O: Objective + ?Sized> {
    objective: &'a O,
    cfg: RunConfig,
    w: ParamVector,
    state: MomentumState,
    sampler: SeededRng,
}

impl<'a, O: Objective + ?Sized> Stepper<'a, O> {
    pub fn new(objective: &'a O, cfg: &RunConfig) -> Result<Self, OptimError> {
        cfg.validate()?;
        let d = objective.dim();
        Ok(Self {
            objective,
            w: cfg.initial_point(d)?,
            state: MomentumState::new(d, cfg.beta)?,
            sampler: SeededRng::new(cfg.seed, Stream::Sampling),
            cfg: cfg.clone(),
        })
    }

    pub fn t(&self) -> u64 {
        self.state.t
    }

    pub fn iterate(&self) -> &ParamVector {
        &self.w
    }

    pub fn momentum(&self) -> &ParamVector {
        &self.state.m
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn objective(&self) -> &'a O {
        self.objective
    }

    /// Draws the next sample without stepping.
    pub fn draw_sample(&mut self) -> StochasticSample {
        StochasticSample::draw(&mut self.sampler, self.objective.num_samples(), self.cfg.batch_size)
    }

    pub fn step(&mut self) -> Result<StepInfo, OptimError> {
        let sample = self.draw_sample();
        self.step_with(sample)
    }

    /// One iteration with a caller-supplied sample.
    pub fn step_with(&mut self, sample: StochasticSample) -> Result<StepInfo, OptimError> {
        let t = self.state.t;
        let g = self.objective.stoch_grad(&self.w, &sample)?;
        self.state.update(&g)?;
        let eta_used = step_size_for(t, &self.cfg);
        let mut next = self.w.clone();
        next.axpy(-eta_used, &self.state.m);
        if !next.is_finite() || next.norm() > DIVERGENCE_NORM {
            return Err(OptimError::Diverged { last_finite_t: t });
        }
        let w = std::mem::replace(&mut self.w, next);
        Ok(StepInfo { t, w, sample, g, m: self.state.m.clone(), eta_used })
    }
}

/// One row of a trajectory log.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub eta_used: f64,
    pub f: f64,
    pub grad_norm: f64,
    pub momentum_norm: f64,
    pub lambda_min: Option<f64>,
    pub region: Option<RegionLabel>,
    pub apag: Option<f64>,
    pub apcg: Option<ApcgValue>,
    pub grace: Option<f64>,
    pub cnc_proj: Option<f64>,
    pub rel_dist: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: u64,
    pub w: ParamVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_w: ParamVector,
    pub max_momentum_norm: f64,
    pub records: u64,
    /// Iterates at multiples of the boost period (Algorithm 2 only), including `w_T` when aligned.
    pub snapshots: Vec<Snapshot>,
}

/// Runs `cfg.iterations` iterations, streaming one record per iteration to `sink`.
///
/// On divergence the records up to the last finite iterate have already been
/// delivered when `Diverged` is returned.
pub fn run<O, F>(objective: &O, cfg: &RunConfig, mut sink: F) -> Result<RunSummary, OptimError>
where
    O: Objective + ?Sized,
    F: FnMut(&TrajectoryRecord),
{
    let mut stepper = Stepper::new(objective, cfg)?;
    let truth = objective.truth();
    let mut max_m: f64 = 0.0;
    let mut snapshots = Vec::new();
    let monitors = &cfg.monitors;

    for t in 0..cfg.iterations {
        if let Some(b) = cfg.boost {
            if t % b.period == 0 {
                snapshots.push(Snapshot { t, w: stepper.iterate().clone() });
            }
        }
        let step = stepper.step()?;
        let f = objective.value(&step.w)?;
        let grad = objective.full_grad(&step.w)?;
        let grad_norm = grad.norm();
        if !f.is_finite() || !grad_norm.is_finite() {
            return Err(OptimError::Diverged { last_finite_t: t });
        }
        let momentum_norm = step.m.norm();
        max_m = max_m.max(momentum_norm);

        let mut record = TrajectoryRecord {
            t,
            eta_used: step.eta_used,
            f,
            grad_norm,
            momentum_norm,
            lambda_min: None,
            region: None,
            apag: None,
            apcg: None,
            grace: None,
            cnc_proj: None,
            rel_dist: truth.map(|ws| relative_distance(&step.w, ws)).transpose()?,
        };
        if monitors.any() && t % monitors.stride == 0 {
            let v = evaluate_monitors(
                objective, monitors, &step.w, &grad, &step.g, &step.m, cfg.eta, cfg.beta,
            )?;
            record.lambda_min = v.lambda_min;
            record.region = v.region;
            record.apag = v.apag;
            record.apcg = v.apcg;
            record.grace = v.grace;
            record.cnc_proj = v.cnc_proj;
        }
        sink(&record);
    }
    if let Some(b) = cfg.boost {
        if cfg.iterations % b.period == 0 && cfg.iterations > 0 {
            snapshots.push(Snapshot { t: cfg.iterations, w: stepper.iterate().clone() });
        }
    }
    Ok(RunSummary {
        final_w: stepper.iterate().clone(),
        max_momentum_norm: max_m,
        records: cfg.iterations,
        snapshots,
    })
}

/// Uniformly random choice among the periodic snapshots.
pub fn select_candidate<'s>(
    snapshots: &'s [Snapshot],
    rng: &mut SeededRng,
) -> Result<&'s Snapshot, OptimError> {
    if snapshots.is_empty() {
        return Err(OptimError::NoSnapshots);
    }
    Ok(&snapshots[rng.index(snapshots.len())])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::generate_saddle_quadratic;

    #[test]
    fn momentum_from_zero() {
        let s = MomentumState::new(2, 0.7).unwrap();
        let next = momentum_update(&s, &[1.0, 2.0]).unwrap();
        assert_eq!(next.m.as_slice(), &[1.0, 2.0]);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn momentum_arithmetic() {
        let s = MomentumState { m: ParamVector::from([2.0, 0.0]), beta: 0.5, t: 3 };
        let next = momentum_update(&s, &[0.0, 1.0]).unwrap();
        assert_eq!(next.m.as_slice(), &[1.0, 1.0]);
        assert_eq!(next.t, 4);
    }

    #[test]
    fn momentum_beta_zero_is_gradient() {
        let s = MomentumState { m: ParamVector::from([9.0, -4.0]), beta: 0.0, t: 0 };
        let next = momentum_update(&s, &[0.25, -1.5]).unwrap();
        assert_eq!(next.m.as_slice(), &[0.25, -1.5]);
    }

    #[test]
    fn momentum_dimension_error() {
        let s = MomentumState::new(2, 0.5).unwrap();
        assert!(matches!(
            momentum_update(&s, &[1.0]),
            Err(OptimError::DimensionError { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn step_schedule() {
        let mut cfg = RunConfig::new(0.01, 0.9, 100, 1);
        cfg.boost = Some(BoostSchedule { r: 0.5, period: 10 });
        assert_eq!(step_size_for(0, &cfg), 0.5);
        assert_eq!(step_size_for(7, &cfg), 0.01);
        assert_eq!(step_size_for(20, &cfg), 0.5);
        cfg.boost = None;
        assert_eq!(step_size_for(0, &cfg), 0.01);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = RunConfig::new(0.01, 0.9, 10, 1);
        let mut c = base.clone();
        c.eta = 0.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.beta = 1.0;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.boost = Some(BoostSchedule { r: 0.001, period: 5 });
        assert!(c.validate().is_err());
        let mut c = base;
        c.boost = Some(BoostSchedule { r: 0.1, period: 0 });
        assert!(c.validate().is_err());
    }

    #[test]
    fn exactly_t_records() {
        let inst = generate_saddle_quadratic(1, 10).unwrap();
        let cfg = RunConfig::new(5e-5, 0.9, 123, 1);
        let mut ts = Vec::new();
        let summary = run(&inst, &cfg, |r| ts.push(r.t)).unwrap();
        assert_eq!(ts, (0..123).collect::<Vec<_>>());
        assert_eq!(summary.records, 123);
    }

    #[test]
    fn one_boost_per_period() {
        let inst = generate_saddle_quadratic(1, 10).unwrap();
        let mut cfg = RunConfig::new(5e-5, 0.5, 97, 2);
        cfg.boost = Some(BoostSchedule { r: 1e-3, period: 10 });
        let mut used = Vec::new();
        run(&inst, &cfg, |r| used.push(r.eta_used)).unwrap();
        for window in used.windows(10) {
            assert_eq!(window.iter().filter(|&&e| e == 1e-3).count(), 1);
        }
    }

    #[test]
    fn snapshots_at_period_multiples() {
        let inst = generate_saddle_quadratic(1, 10).unwrap();
        let mut cfg = RunConfig::new(5e-5, 0.5, 40, 2);
        cfg.boost = Some(BoostSchedule { r: 1e-3, period: 10 });
        let summary = run(&inst, &cfg, |_| {}).unwrap();
        let ts: Vec<u64> = summary.snapshots.iter().map(|s| s.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 30, 40]);
        assert_eq!(summary.snapshots[4].w, summary.final_w);
    }

    #[test]
    fn selection_cases() {
        let snaps: Vec<Snapshot> = (0..4)
            .map(|k| Snapshot { t: 10 * k, w: ParamVector::from([k as f64, 0.0]) })
            .collect();
        let mut rng = SeededRng::new(1, Stream::Selection);
        assert_eq!(select_candidate(&snaps[..1], &mut rng).unwrap().t, 0);
        assert_eq!(select_candidate(&[], &mut rng), Err(OptimError::NoSnapshots));

        let mut a = SeededRng::new(9, Stream::Selection);
        let mut b = SeededRng::new(9, Stream::Selection);
        assert_eq!(select_candidate(&snaps, &mut a).unwrap(), select_candidate(&snaps, &mut b).unwrap());

        let mut counts = [0usize; 4];
        let mut rng = SeededRng::new(3, Stream::Selection);
        let draws = 100_000;
        for _ in 0..draws {
            counts[(select_candidate(&snaps, &mut rng).unwrap().t / 10) as usize] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.25).abs() <= 0.01, "{freq}");
        }
    }

    #[test]
    fn diverges_with_huge_step() {
        let inst = generate_saddle_quadratic(1, 10).unwrap();
        let mut cfg = RunConfig::new(1.0, 0.0, 10_000, 1);
        cfg.w0 = InitSpec::Explicit(ParamVector::from([1.0, 1.0]));
        let mut last = None;
        let err = run(&inst, &cfg, |r| {
            assert!(r.f.is_finite() && r.grad_norm.is_finite());
            last = Some(r.t);
        })
        .unwrap_err();
        match err {
            OptimError::Diverged { last_finite_t } => assert_eq!(Some(last_finite_t), last.map(|t| t + 1)),
            other => panic!("unexpected {other:?}"),
        }
    }
}
