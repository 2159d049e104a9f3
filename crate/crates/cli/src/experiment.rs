//! Turning a config file into a runnable experiment.

use std::path::PathBuf;

use saddlescout_core::diagnostics::{ApagMonitor, ApcgMonitor, MonitorConfig, GRAD_FLOOR};
use saddlescout_core::optim::{BoostSchedule, InitSpec, RunConfig, TrajectoryRecord};
use saddlescout_core::problems::{
    generate_phase_retrieval, generate_saddle_quadratic, read_dataset, Objective, Problem, ProblemId,
};
use saddlescout_core::ParamVector;

use crate::config::{Config, ConfigError};
use crate::HarnessError;

/// What counts as "escaped" for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EscapeRule {
    /// First `t` with `f(w_t) <= threshold`.
    FBelow(f64),
    /// First `t` with relative distance to the truth `<= threshold`.
    RelDistBelow(f64),
}

impl EscapeRule {
    pub fn hit(&self, f: f64, rel_dist: Option<f64>) -> bool {
        match *self {
            EscapeRule::FBelow(thr) => f <= thr,
            EscapeRule::RelDistBelow(thr) => rel_dist.is_some_and(|r| r <= thr),
        }
    }

    pub fn hit_record(&self, rec: &TrajectoryRecord) -> bool {
        self.hit(rec.f, rec.rel_dist)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub problem: ProblemId,
    pub seed: u64,
    pub n: usize,
    pub d: usize,
    pub dataset: Option<PathBuf>,
    pub run: RunConfig,
    pub escape: EscapeRule,
    pub output_stride: u64,
}

struct Defaults {
    n: usize,
    d: usize,
    batch: usize,
    eta: f64,
    iterations: u64,
}

fn defaults(problem: ProblemId) -> Defaults {
    match problem {
        ProblemId::SaddleQuadratic => Defaults { n: 10, d: 2, batch: 1, eta: 5e-5, iterations: 500_000 },
        ProblemId::PhaseRetrieval => Defaults { n: 200, d: 10, batch: 10, eta: 5e-4, iterations: 200_000 },
    }
}

/// The default starting point: the origin for the saddle objective, a tiny
/// Gaussian `N(0, I/(10000·d))` for phase retrieval.
pub fn default_w0(problem: ProblemId, d: usize) -> InitSpec {
    match problem {
        ProblemId::SaddleQuadratic => InitSpec::Zero,
        ProblemId::PhaseRetrieval => InitSpec::Gaussian { scale: 1.0 / (10_000.0 * d as f64).sqrt() },
    }
}

fn parse_w0(cfg: &Config, text: &str) -> Result<InitSpec, ConfigError> {
    let text = text.trim();
    if text == "zero" {
        return Ok(InitSpec::Zero);
    }
    if let Some(inner) = text.strip_prefix("gaussian(").and_then(|s| s.strip_suffix(')')) {
        let scale: f64 = inner.trim().parse().map_err(|_| cfg.error("w0", format!("bad scale '{inner}'")))?;
        return Ok(InitSpec::Gaussian { scale });
    }
    let values = cfg
        .get_list::<f64>("w0")?
        .ok_or_else(|| cfg.error("w0", "missing value"))?;
    Ok(InitSpec::Explicit(ParamVector::from(values)))
}

pub fn monitor_config(cfg: &Config, problem: ProblemId, t_thred: Option<u64>) -> Result<MonitorConfig, ConfigError> {
    let defaults = MonitorConfig::defaults_for(problem, t_thred);
    let mut m = if cfg.get_bool("monitor.defaults")?.unwrap_or(false) {
        defaults.clone()
    } else {
        MonitorConfig { stride: defaults.stride, eps: defaults.eps, ..MonitorConfig::off() }
    };
    m.stride = cfg.get_or("monitor.stride", m.stride)?;
    m.eps = cfg.get_or("monitor.eps", m.eps)?;

    let apag_default = defaults.apag.expect("defaults enable every monitor");
    let apag_on = cfg.get_bool("monitor.apag")?.unwrap_or(m.apag.is_some() || cfg.contains("monitor.apag.min_grad"));
    m.apag = if apag_on {
        let base = m.apag.unwrap_or(apag_default);
        Some(ApagMonitor { min_grad: cfg.get_or("monitor.apag.min_grad", base.min_grad)? })
    } else {
        None
    };

    let apcg_default = defaults.apcg.expect("defaults enable every monitor");
    let apcg_sub = ["monitor.apcg.tau", "monitor.apcg.k", "monitor.apcg.saddle_only"]
        .iter()
        .any(|k| cfg.contains(k));
    let apcg_on = cfg.get_bool("monitor.apcg")?.unwrap_or(m.apcg.is_some() || apcg_sub);
    m.apcg = if apcg_on {
        let base = m.apcg.unwrap_or(apcg_default);
        Some(ApcgMonitor {
            tau: cfg.get_or("monitor.apcg.tau", base.tau)?,
            k: cfg.get_or("monitor.apcg.k", base.k)?,
            saddle_only: cfg.get_bool("monitor.apcg.saddle_only")?.unwrap_or(base.saddle_only),
        })
    } else {
        None
    };
    m.grace = cfg.get_bool("monitor.grace")?.unwrap_or(m.grace);
    m.cnc = cfg.get_bool("monitor.cnc")?.unwrap_or(m.cnc);
    m.hessian = cfg.get_bool("monitor.hessian")?.unwrap_or(m.hessian);

    if m.stride < 1 {
        return Err(cfg.error("monitor.stride", "must be >= 1"));
    }
    if !(m.eps > 0.0) {
        return Err(cfg.error("monitor.eps", "must be > 0"));
    }
    if let Some(a) = m.apcg {
        if a.tau < 2 || a.k < 1 || a.k >= a.tau {
            return Err(cfg.error("monitor.apcg.tau", "need tau >= 2 and 1 <= k <= tau - 1"));
        }
    }
    if let Some(a) = m.apag {
        if !(a.min_grad >= GRAD_FLOOR) {
            return Err(cfg.error("monitor.apag.min_grad", format!("must be >= {GRAD_FLOOR:e}")));
        }
    }
    Ok(m)
}

impl Experiment {
    /// Reads an experiment from a config; `seed_override` replaces the `seed` key.
    pub fn from_config(cfg: &Config, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let problem: ProblemId = cfg
            .get("problem")?
            .ok_or_else(|| ConfigError::new(None, "missing required key 'problem'"))?;
        let def = defaults(problem);
        let seed = match seed_override {
            Some(s) => s,
            None => cfg.get_or("seed", 1)?,
        };
        let n: usize = cfg.get_or("n", def.n)?;
        let d: usize = cfg.get_or("d", def.d)?;
        if n < 1 {
            return Err(cfg.error("n", "must be >= 1"));
        }
        if problem == ProblemId::SaddleQuadratic && d != 2 {
            return Err(cfg.error("d", "the saddle objective is two-dimensional"));
        }
        if d < 1 {
            return Err(cfg.error("d", "must be >= 1"));
        }

        let eta = cfg.get_or("eta", def.eta)?;
        let beta = cfg.get_or("beta", 0.9)?;
        let iterations = cfg.get_or("iterations", def.iterations)?;
        let mut run = RunConfig::new(eta, beta, iterations, seed);
        run.batch_size = cfg.get_or("batch", def.batch)?;
        run.w0 = match cfg.raw("w0") {
            Some(text) => parse_w0(cfg, text)?,
            None => default_w0(problem, d),
        };
        let r: Option<f64> = cfg.get("r")?;
        let t_thred: Option<u64> = cfg.get("t_thred")?;
        run.boost = match (r, t_thred) {
            (Some(r), Some(period)) => Some(BoostSchedule { r, period }),
            (None, None) => None,
            (Some(_), None) => return Err(cfg.error("r", "a boosted step needs 't_thred' as well")),
            (None, Some(_)) => return Err(cfg.error("t_thred", "a period needs 'r' as well")),
        };
        run.monitors = monitor_config(cfg, problem, t_thred)?;
        run.validate().map_err(|e| ConfigError::new(None, e.to_string()))?;
        if let InitSpec::Explicit(w) = &run.w0 {
            if w.dim() != d {
                return Err(cfg.error("w0", format!("expected {d} values, got {}", w.dim())));
            }
        }

        let escape = match problem {
            ProblemId::SaddleQuadratic => EscapeRule::FBelow(cfg.get_or("escape.f_threshold", -0.5)?),
            ProblemId::PhaseRetrieval => EscapeRule::RelDistBelow(cfg.get_or("escape.rel_dist", 0.1)?),
        };
        let output_stride = cfg.get_or("output.stride", 1)?;
        if output_stride < 1 {
            return Err(cfg.error("output.stride", "must be >= 1"));
        }
        Ok(Self {
            problem,
            seed,
            n,
            d,
            dataset: cfg.raw("dataset").map(PathBuf::from),
            run,
            escape,
            output_stride,
        })
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.seed = seed;
        out.run.seed = seed;
        out
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut out = self.clone();
        out.run.beta = beta;
        out
    }

    /// Loads the dataset file if one is configured, otherwise generates the instance from the seed.
    pub fn load_problem(&self) -> Result<Problem, HarnessError> {
        let problem = match &self.dataset {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                let p = read_dataset(&text).map_err(|e| HarnessError::Config(ConfigError::new(None, format!("{}: {e}", path.display()))))?;
                if p.id() != self.problem || p.dim() != self.d {
                    return Err(HarnessError::Config(ConfigError::new(
                        None,
                        format!("{}: dataset does not match the configured problem", path.display()),
                    )));
                }
                p
            }
            None => match self.problem {
                ProblemId::SaddleQuadratic => Problem::Saddle(
                    generate_saddle_quadratic(self.seed, self.n).map_err(|e| ConfigError::new(None, e.to_string()))?,
                ),
                ProblemId::PhaseRetrieval => Problem::Phase(
                    generate_phase_retrieval(self.seed, self.d, self.n)
                        .map_err(|e| ConfigError::new(None, e.to_string()))?,
                ),
            },
        };
        Ok(problem)
    }
}
