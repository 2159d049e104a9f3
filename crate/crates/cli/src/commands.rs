//! The four subcommands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use saddlescout_core::optim::{run, OptimError};
use saddlescout_core::planner::{plan_parameters, PlanError, PlannerConstants, PlannerResult};
use saddlescout_core::problems::{write_dataset, Problem};

use crate::check::{run_checks, CheckOutcome, Fixture};
use crate::config::{Config, ConfigError};
use crate::experiment::Experiment;
use crate::output::{
    fmt_num, median, read_trajectory, render_summary, summarize_rows, CellOutcome, RunStats, SummaryHeader,
    TrajectoryWriter,
};
use crate::HarnessError;

pub const SEED_ENV: &str = "SADDLESCOUT_SEED";

/// Seed override from the environment, if set.
pub fn env_seed() -> Result<Option<u64>, HarnessError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ConfigError::new(None, format!("{SEED_ENV} = '{v}' is not an unsigned integer")).into()),
        Err(_) => Ok(None),
    }
}

pub fn load_config(path: &Path) -> Result<Config, HarnessError> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Config::parse(&text).map_err(|e| ConfigError::new(e.line, format!("{}: {}", path.display(), e.msg)).into())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(format!("{}: {e}", path.display()))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |e| HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Result of running one experiment to a trajectory file.
#[derive(Debug, Clone)]
pub struct CellRun {
    pub stats: RunStats,
    pub diverged_after: Option<u64>,
}

/// Runs `exp`, streaming its trajectory to `csv_path`. Divergence is reported, not raised.
pub fn run_to_csv(exp: &Experiment, problem: &Problem, csv_path: &Path) -> Result<CellRun, HarnessError> {
    let file = File::create(csv_path).map_err(io_err(csv_path))?;
    let mut writer = TrajectoryWriter::new(BufWriter::new(file), exp.output_stride, exp.run.iterations, exp.escape)
        .map_err(csv_err(csv_path))?;
    let mut stats = RunStats::default();
    let mut write_error = None;
    let result = run(problem, &exp.run, |rec| {
        stats.push(rec, exp.escape);
        if write_error.is_none() {
            write_error = writer.write(rec).err();
        }
    });
    writer.flush().map_err(io_err(csv_path))?;
    if let Some(e) = write_error {
        return Err(csv_err(csv_path)(e));
    }
    let diverged_after = match result {
        Ok(_) => None,
        Err(OptimError::Diverged { last_finite_t }) => Some(last_finite_t),
        Err(e) => return Err(HarnessError::Config(ConfigError::new(None, e.to_string()))),
    };
    Ok(CellRun { stats, diverged_after })
}

pub fn cmd_run(config: &Path, out: &Path) -> Result<String, HarnessError> {
    let cfg = load_config(config)?;
    let exp = Experiment::from_config(&cfg, env_seed()?)?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let problem = exp.load_problem()?;
    let dataset_path = out.join("dataset.txt");
    fs::write(&dataset_path, write_dataset(&problem)).map_err(io_err(&dataset_path))?;

    let cell = run_to_csv(&exp, &problem, &out.join("trajectory.csv"))?;
    let summary = render_summary(
        &SummaryHeader {
            problem: exp.problem.as_str(),
            seed: exp.seed,
            eta: exp.run.eta,
            beta: exp.run.beta,
            iterations: exp.run.iterations,
            diverged_after: cell.diverged_after,
        },
        &cell.stats,
    );
    let summary_path = out.join("summary.txt");
    fs::write(&summary_path, &summary).map_err(io_err(&summary_path))?;
    match cell.diverged_after {
        Some(t) => Err(HarnessError::Diverged(t)),
        None => Ok(summary),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Mean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Experiment,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub statistic: Statistic,
}

pub const DEFAULT_BETAS: [f64; 5] = [0.0, 0.3, 0.5, 0.7, 0.9];

impl SweepSpec {
    /// `seed_override` replaces the seed list with that single seed.
    pub fn from_config(cfg: &Config, seed_override: Option<u64>) -> Result<Self, ConfigError> {
        let base = Experiment::from_config(cfg, seed_override)?;
        let betas = cfg.get_list("sweep.betas")?.unwrap_or_else(|| DEFAULT_BETAS.to_vec());
        let seeds = match seed_override {
            Some(s) => vec![s],
            None => cfg.get_list("sweep.seeds")?.unwrap_or_else(|| vec![base.seed]),
        };
        let statistic = match cfg.raw("sweep.statistic").unwrap_or("median") {
            "median" => Statistic::Median,
            "mean" => Statistic::Mean,
            other => return Err(cfg.error("sweep.statistic", format!("expected median or mean, got '{other}'"))),
        };
        if betas.is_empty() || seeds.is_empty() {
            return Err(ConfigError::new(None, "sweep needs at least one beta and one seed"));
        }
        for &b in &betas {
            if !(0.0..1.0).contains(&b) {
                return Err(cfg.error("sweep.betas", format!("beta = {b} outside [0, 1)")));
            }
        }
        Ok(Self { base, betas, seeds, statistic })
    }

    /// Cells in output order: by beta as listed, then by seed as listed.
    pub fn cells(&self) -> Vec<(f64, u64)> {
        self.betas.iter().flat_map(|&b| self.seeds.iter().map(move |&s| (b, s))).collect()
    }
}

pub fn cell_file_name(beta: f64, seed: u64) -> String {
    format!("trajectory_beta{beta}_seed{seed}.csv")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub beta: f64,
    pub seed: u64,
    pub outcome: CellOutcome,
}

/// Aggregated escape iteration; `None` when too many cells never escaped.
pub fn aggregate(escapes: &[Option<u64>], statistic: Statistic) -> Option<f64> {
    let values: Vec<f64> = escapes.iter().map(|e| e.map_or(f64::INFINITY, |t| t as f64)).collect();
    let v = match statistic {
        Statistic::Median => median(&values)?,
        Statistic::Mean => values.iter().sum::<f64>() / values.len() as f64,
    };
    v.is_finite().then_some(v)
}

/// Builds the sweep summary from the per-cell CSVs alone.
pub fn summarize_sweep(spec: &SweepSpec, dir: &Path) -> Result<(Vec<SweepRow>, String), HarnessError> {
    let mut rows = Vec::new();
    for (beta, seed) in spec.cells() {
        let path = dir.join("cells").join(cell_file_name(beta, seed));
        let file = File::open(&path).map_err(io_err(&path))?;
        let data = read_trajectory(file).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        let outcome = summarize_rows(&data, spec.base.escape, spec.base.run.iterations);
        rows.push(SweepRow { beta, seed, outcome });
    }
    let stat_name = match spec.statistic {
        Statistic::Median => "median",
        Statistic::Mean => "mean",
    };
    let mut csv = String::from("kind,beta,seed,status,escape_iteration\n");
    for r in &rows {
        let status = if r.outcome.completed { "completed" } else { "diverged" };
        let esc = r.outcome.escape.map_or("never".to_string(), |t| t.to_string());
        let _ = writeln!(csv, "cell,{},{},{status},{esc}", r.beta, r.seed);
    }
    for &beta in &spec.betas {
        let escapes: Vec<Option<u64>> = rows.iter().filter(|r| r.beta == beta).map(|r| r.outcome.escape).collect();
        let hit = escapes.iter().filter(|e| e.is_some()).count();
        let agg = aggregate(&escapes, spec.statistic).map_or("never".to_string(), fmt_num);
        let _ = writeln!(csv, "{stat_name},{beta},,{hit}/{} escaped,{agg}", escapes.len());
    }
    Ok((rows, csv))
}

pub fn cmd_sweep(config: &Path, out: &Path, jobs: usize) -> Result<String, HarnessError> {
    let cfg = load_config(config)?;
    let spec = SweepSpec::from_config(&cfg, env_seed()?)?;
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir).map_err(io_err(&cells_dir))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Io(e.to_string()))?;
    let results: Vec<Result<CellRun, HarnessError>> = pool.install(|| {
        spec.cells()
            .par_iter()
            .map(|&(beta, seed)| {
                let exp = spec.base.with_seed(seed).with_beta(beta);
                let problem = exp.load_problem()?;
                run_to_csv(&exp, &problem, &cells_dir.join(cell_file_name(beta, seed)))
            })
            .collect()
    });
    for r in results {
        r?;
    }
    let (_, csv) = summarize_sweep(&spec, out)?;
    let path = out.join("sweep_summary.csv");
    fs::write(&path, &csv).map_err(io_err(&path))?;
    Ok(csv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
}

pub fn planner_constants(cfg: &Config) -> Result<PlannerConstants, ConfigError> {
    let d = PlannerConstants::default();
    let c = PlannerConstants {
        l: cfg.get_or("plan.L", d.l)?,
        rho: cfg.get_or("plan.rho", d.rho)?,
        sigma2: cfg.get_or("plan.sigma2", d.sigma2)?,
        c_m: cfg.get_or("plan.c_m", d.c_m)?,
        c_prime: cfg.get_or("plan.c_prime", d.c_prime)?,
        c_h: cfg.get_or("plan.c_h", d.c_h)?,
        gamma: cfg.get_or("plan.gamma", d.gamma)?,
        delta: cfg.get_or("plan.delta", d.delta)?,
        eps: cfg.get_or("plan.eps", d.eps)?,
        beta: cfg.get_or("plan.beta", d.beta)?,
        delta_f: cfg.get_or("plan.delta_f", d.delta_f)?,
        c_t: cfg.get_or("plan.c_T", d.c_t)?,
    };
    c.validate().map_err(|e| ConfigError::new(None, e.to_string()))?;
    Ok(c)
}

pub fn render_plan(plan: &PlannerResult, format: Format) -> String {
    let mut s = String::new();
    let values = [
        ("r", plan.r),
        ("eta", plan.eta),
        ("eta_table", plan.eta_table),
        ("halvings", f64::from(plan.halvings)),
        ("F_thred", plan.f_thred),
        ("T_thred", plan.t_thred),
        ("T", plan.t_total),
        ("periods", plan.periods),
    ];
    match format {
        Format::Text => {
            for (name, v) in values {
                let _ = writeln!(s, "{name:<10} = {v:.6e}");
            }
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<18} {:<13} {:<13} {:<7} inequality", "constraint", "lhs", "rhs", "status");
            for c in &plan.report {
                let _ = writeln!(
                    s,
                    "{:<18} {:<13.6e} {:<13.6e} {:<7} {}",
                    c.name, c.lhs, c.rhs, c.status.to_string(), c.text
                );
            }
        }
        Format::Csv => {
            let _ = writeln!(s, "kind,name,inequality,lhs,rhs,status");
            for (name, v) in values {
                let _ = writeln!(s, "value,{name},,{},,", fmt_num(v));
            }
            for c in &plan.report {
                let _ = writeln!(
                    s,
                    "constraint,{},\"{}\",{},{},{}",
                    c.name,
                    c.text,
                    fmt_num(c.lhs),
                    fmt_num(c.rhs),
                    c.status.to_string().to_lowercase()
                );
            }
        }
    }
    s
}

/// Prints the plan (or the failing report) and returns it.
pub fn cmd_plan(config: &Path, format: Format) -> Result<String, HarnessError> {
    let cfg = load_config(config)?;
    let constants = planner_constants(&cfg)?;
    match plan_parameters(&constants) {
        Ok(plan) => Ok(render_plan(&plan, format)),
        Err(PlanError::Infeasible { constraint, result }) => {
            Err(HarnessError::Infeasible { constraint, report: render_plan(&result, format) })
        }
        Err(PlanError::InvalidConstant(msg)) => Err(ConfigError::new(None, msg).into()),
    }
}

pub fn cmd_check(fixture: Fixture) -> (Vec<CheckOutcome>, bool) {
    let outcomes = run_checks(fixture);
    let ok = outcomes.iter().all(|c| c.pass);
    (outcomes, ok)
}

/// Writes `text` to stdout, ignoring a closed pipe.
pub fn print(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}
