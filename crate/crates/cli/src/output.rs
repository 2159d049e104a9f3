//! Trajectory CSVs and run summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use saddlescout_core::diagnostics::{ApcgValue, RegionLabel};
use saddlescout_core::optim::TrajectoryRecord;

use crate::experiment::EscapeRule;

pub const TRAJECTORY_COLUMNS: [&str; 10] = [
    "t", "eta_used", "f", "grad_norm", "lambda_min", "apag", "apcg", "grace", "cnc_proj", "rel_dist",
];

/// Marker written in the `apcg` column when the PSD precondition failed.
pub const NOT_PSD: &str = "NotPSD";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn record_fields(rec: &TrajectoryRecord) -> [String; 10] {
    [
        rec.t.to_string(),
        fmt_num(rec.eta_used),
        fmt_num(rec.f),
        fmt_num(rec.grad_norm),
        opt(rec.lambda_min),
        opt(rec.apag),
        match rec.apcg {
            Some(ApcgValue::Ratio(v)) => fmt_num(v),
            Some(ApcgValue::NotPsd) => NOT_PSD.to_string(),
            None => String::new(),
        },
        opt(rec.grace),
        opt(rec.cnc_proj),
        opt(rec.rel_dist),
    ]
}

fn monitored(rec: &TrajectoryRecord) -> bool {
    rec.lambda_min.is_some()
        || rec.apag.is_some()
        || rec.apcg.is_some()
        || rec.grace.is_some()
        || rec.cnc_proj.is_some()
}

/// Streams records to CSV.
///
/// With `stride > 1` only every `stride`-th iteration is written, but rows
/// carrying monitor values, the first escape row and the final iteration are
/// always kept so that summaries can be recomputed from the file.
pub struct TrajectoryWriter<W: Write> {
    inner: csv::Writer<W>,
    stride: u64,
    last_t: u64,
    escape: EscapeRule,
    escaped: bool,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W, stride: u64, iterations: u64, escape: EscapeRule) -> csv::Result<Self> {
        let mut inner = csv::Writer::from_writer(out);
        inner.write_record(TRAJECTORY_COLUMNS)?;
        Ok(Self { inner, stride: stride.max(1), last_t: iterations.saturating_sub(1), escape, escaped: false })
    }

    pub fn write(&mut self, rec: &TrajectoryRecord) -> csv::Result<()> {
        let escape_now = !self.escaped && self.escape.hit_record(rec);
        self.escaped |= escape_now;
        if rec.t % self.stride == 0 || escape_now || rec.t == self.last_t || monitored(rec) {
            self.inner.write_record(record_fields(rec))?;
        }
        Ok(())
    }

    pub fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// The columns the sweep summary needs, read back from a trajectory CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub t: u64,
    pub f: f64,
    pub rel_dist: Option<f64>,
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<CsvRow>, String> {
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    if headers.iter().ne(TRAJECTORY_COLUMNS) {
        return Err("unexpected trajectory header".into());
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let bad = |col: &str| format!("row {}: bad {col}", i + 2);
        let t = rec[0].parse().map_err(|_| bad("t"))?;
        let f = rec[2].parse().map_err(|_| bad("f"))?;
        let rel_dist = match &rec[9] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("rel_dist"))?),
        };
        rows.push(CsvRow { t, f, rel_dist });
    }
    Ok(rows)
}

/// Outcome of one trajectory as far as a sweep cares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellOutcome {
    pub completed: bool,
    pub last_t: Option<u64>,
    pub escape: Option<u64>,
}

/// Recomputes a cell outcome from its CSV rows alone.
pub fn summarize_rows(rows: &[CsvRow], rule: EscapeRule, iterations: u64) -> CellOutcome {
    let last_t = rows.last().map(|r| r.t);
    CellOutcome {
        completed: iterations == 0 || last_t == Some(iterations - 1),
        last_t,
        escape: rows.iter().find(|r| rule.hit(r.f, r.rel_dist)).map(|r| r.t),
    }
}

/// Running aggregates for `summary.txt`.
#[derive(Debug, Clone, Default)]
pub struct RunStats {
    pub records: u64,
    pub final_f: Option<f64>,
    pub final_rel_dist: Option<f64>,
    pub min_f: Option<f64>,
    pub max_momentum_norm: f64,
    pub escape: Option<u64>,
    pub regions: BTreeMap<&'static str, u64>,
    pub apag: Vec<f64>,
    pub apcg: Vec<f64>,
    pub apcg_not_psd: u64,
    pub grace: Vec<f64>,
    pub cnc: Vec<f64>,
}

impl RunStats {
    pub fn push(&mut self, rec: &TrajectoryRecord, rule: EscapeRule) {
        self.records += 1;
        self.final_f = Some(rec.f);
        self.final_rel_dist = rec.rel_dist;
        self.min_f = Some(self.min_f.map_or(rec.f, |m| m.min(rec.f)));
        self.max_momentum_norm = self.max_momentum_norm.max(rec.momentum_norm);
        if self.escape.is_none() && rule.hit_record(rec) {
            self.escape = Some(rec.t);
        }
        if let Some(region) = rec.region {
            *self.regions.entry(region.as_str()).or_default() += 1;
        }
        self.apag.extend(rec.apag);
        match rec.apcg {
            Some(ApcgValue::Ratio(v)) => self.apcg.push(v),
            Some(ApcgValue::NotPsd) => self.apcg_not_psd += 1,
            None => {}
        }
        self.grace.extend(rec.grace);
        self.cnc.extend(rec.cnc_proj);
    }
}

/// Fraction of values that are `>= 0`; `None` for an empty slice.
pub fn nonneg_fraction(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(values.iter().filter(|v| **v >= 0.0).count() as f64 / values.len() as f64)
}

/// Nearest-rank quantile, `q` in `[0, 1]`.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let idx = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1;
    Some(v[idx])
}

/// Median with the average of the two middle values for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

pub struct SummaryHeader<'a> {
    pub problem: &'a str,
    pub seed: u64,
    pub eta: f64,
    pub beta: f64,
    pub iterations: u64,
    pub diverged_after: Option<u64>,
}

pub fn render_summary(head: &SummaryHeader<'_>, stats: &RunStats) -> String {
    let mut s = String::new();
    let num = |x: Option<f64>| x.map(fmt_num).unwrap_or_else(|| "none".into());
    let _ = writeln!(s, "problem = {}", head.problem);
    let _ = writeln!(s, "seed = {}", head.seed);
    let _ = writeln!(s, "eta = {}", head.eta);
    let _ = writeln!(s, "beta = {}", head.beta);
    let _ = writeln!(s, "iterations = {}", head.iterations);
    match head.diverged_after {
        Some(t) => {
            let _ = writeln!(s, "status = diverged after t = {t}");
        }
        None => {
            let _ = writeln!(s, "status = completed");
        }
    }
    let _ = writeln!(s, "records = {}", stats.records);
    let _ = writeln!(s, "final_f = {}", num(stats.final_f));
    let _ = writeln!(s, "min_f = {}", num(stats.min_f));
    if stats.final_rel_dist.is_some() {
        let _ = writeln!(s, "final_rel_dist = {}", num(stats.final_rel_dist));
    }
    let _ = writeln!(s, "max_momentum_norm = {}", fmt_num(stats.max_momentum_norm));
    match stats.escape {
        Some(t) => {
            let _ = writeln!(s, "escape_iteration = {t}");
        }
        None => {
            let _ = writeln!(s, "escape_iteration = never");
        }
    }
    for label in [
        RegionLabel::LargeGradient,
        RegionLabel::SaddleRegion,
        RegionLabel::SecondOrderStationary,
    ] {
        let name = label.as_str();
        let _ = writeln!(s, "region.{name} = {}", stats.regions.get(name).copied().unwrap_or(0));
    }
    if !stats.apag.is_empty() {
        let _ = writeln!(s, "apag.count = {}", stats.apag.len());
        let _ = writeln!(s, "apag.nonneg_fraction = {}", num(nonneg_fraction(&stats.apag)));
    }
    if !stats.apcg.is_empty() || stats.apcg_not_psd > 0 {
        let _ = writeln!(s, "apcg.count = {}", stats.apcg.len());
        let _ = writeln!(s, "apcg.not_psd = {}", stats.apcg_not_psd);
        let _ = writeln!(s, "apcg.nonneg_fraction = {}", num(nonneg_fraction(&stats.apcg)));
    }
    if !stats.grace.is_empty() {
        let _ = writeln!(s, "grace.count = {}", stats.grace.len());
        let _ = writeln!(s, "grace.median = {}", num(median(&stats.grace)));
        let _ = writeln!(s, "grace.p90 = {}", num(quantile(&stats.grace, 0.9)));
    }
    if !stats.cnc.is_empty() {
        let _ = writeln!(s, "cnc.count = {}", stats.cnc.len());
        let _ = writeln!(s, "cnc.median = {}", num(median(&stats.cnc)));
    }
    s
}
