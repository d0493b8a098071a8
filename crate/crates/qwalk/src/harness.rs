//! Ensemble orchestration, persistence, and scaling-fit regression.
//!
//! A *record* directory holds `spec.json` (the ensemble definition),
//! `rows.csv` (one row per instance, committed in instance order), and
//! `aggregates.json` (per-size means and standard errors). Rows depend only
//! on `(spec, n, index)`, so an interrupted run resumes from the first
//! missing row without changing any completed value.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drivers::{build_for_instance, Graph};
use crate::dynamics::{energy_trace, mixing_time, window_average, MixingConfig, PropagationConfig};
use crate::error::{Error, Result};
use crate::gamma::{
    energy_balance_rate, heuristic_gamma, scan_gamma, GridSpec, SpreadSource,
};
use crate::problems::{generate, Model};
use crate::rng::{instance_seed, per_n_master};
use crate::spectral::p_infinity_for_instance;

/// How the hopping rate is chosen for each instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GammaPolicy {
    /// Brute-force scan per instance; the scan's peak data feeds the
    /// `p_inf` and width columns directly.
    OptimalScan,
    /// One rate per size from the measured mean energy spread of this
    /// ensemble's own instances.
    HeuristicMeasured,
    /// One rate per size from the analytic spread estimate.
    HeuristicAnalytic,
    Fixed { gamma: f64 },
}

/// Measurement window for time-averaged success probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WindowSpec {
    /// `[t, t + dt]` in absolute time units.
    Fixed { t: f64, dt: f64 },
    /// `[lo sqrt(n)/omega, hi sqrt(n)/omega]`.
    SqrtScaled { lo: f64, hi: f64 },
}

impl WindowSpec {
    pub fn bounds(&self, n: u32, omega: f64) -> (f64, f64) {
        match *self {
            WindowSpec::Fixed { t, dt } => (t, dt),
            WindowSpec::SqrtScaled { lo, hi } => {
                let root = (n as f64).sqrt() / omega;
                (lo * root, (hi - lo) * root)
            }
        }
    }
}

/// Per-instance observables an ensemble can request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ObservableSpec {
    /// Infinite-time success probability at the chosen rate.
    PInf,
    /// FWHM (and fractional width) of the scan peak; requires
    /// [`GammaPolicy::OptimalScan`].
    GammaWidth,
    /// Window-averaged success probability.
    WindowAvg { window: WindowSpec },
    /// Doubling mixing-time estimate.
    MixingTime { epsilon: f64 },
    /// Minimum margin of the time-averaged problem energy below its initial
    /// value, over a trace of duration `t_max_over_omega / omega`; positive
    /// margins certify the energy-redistribution inequality.
    EnergyMargin { t_max_over_omega: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub format_version: u32,
    pub model: Model,
    pub n_values: Vec<u32>,
    pub instances_per_n: u64,
    pub master_seed: u64,
    pub omega: f64,
    pub graph: Graph,
    pub gamma_policy: GammaPolicy,
    pub observables: Vec<ObservableSpec>,
    pub grid: GridSpec,
}

pub const RECORD_FORMAT_VERSION: u32 = 1;

impl EnsembleSpec {
    pub fn new(
        model: Model,
        n_values: Vec<u32>,
        instances_per_n: u64,
        master_seed: u64,
        omega: f64,
        graph: Graph,
        gamma_policy: GammaPolicy,
        observables: Vec<ObservableSpec>,
    ) -> Self {
        EnsembleSpec {
            format_version: RECORD_FORMAT_VERSION,
            model,
            n_values,
            instances_per_n,
            master_seed,
            omega,
            graph,
            gamma_policy,
            observables,
            grid: GridSpec::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.instances_per_n == 0 {
            return Err(Error::InvalidInput("instances_per_n must be positive".into()));
        }
        if self.n_values.is_empty() {
            return Err(Error::InvalidInput("n_values is empty".into()));
        }
        if self.omega <= 0.0 {
            return Err(Error::InvalidInput("omega must be positive".into()));
        }
        let wants_width = self
            .observables
            .iter()
            .any(|o| matches!(o, ObservableSpec::GammaWidth));
        if wants_width && self.gamma_policy != GammaPolicy::OptimalScan {
            return Err(Error::InvalidInput(
                "gamma_width requires the optimal_scan policy".into(),
            ));
        }
        Ok(())
    }

    fn jobs(&self) -> Vec<(u32, u64)> {
        let mut jobs = Vec::new();
        for &n in &self.n_values {
            for idx in 0..self.instances_per_n {
                jobs.push((n, idx));
            }
        }
        jobs
    }
}

/// One computed instance.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub n: u32,
    pub index: u64,
    pub instance_seed: u64,
    pub gamma: f64,
    pub p_inf: Option<f64>,
    pub gamma_width: Option<f64>,
    pub frac_width: Option<f64>,
    pub window_avg: Option<f64>,
    pub mixing_time: Option<f64>,
    pub energy_margin: Option<f64>,
    pub wall_ms: f64,
}

const ROW_HEADER: &str =
    "n,index,instance_seed,gamma,p_inf,gamma_width,frac_width,window_avg,mixing_time,energy_margin,wall_ms";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

impl EnsembleRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.16e},{},{},{},{},{},{},{:.3}",
            self.n,
            self.index,
            self.instance_seed,
            self.gamma,
            fmt_opt(self.p_inf),
            fmt_opt(self.gamma_width),
            fmt_opt(self.frac_width),
            fmt_opt(self.window_avg),
            fmt_opt(self.mixing_time),
            fmt_opt(self.energy_margin),
            self.wall_ms
        )
    }

    fn parse_csv(line: &str) -> Option<EnsembleRow> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 11 {
            return None;
        }
        let opt = |s: &str| -> Option<Option<f64>> {
            if s.is_empty() {
                Some(None)
            } else {
                s.parse::<f64>().ok().map(Some)
            }
        };
        Some(EnsembleRow {
            n: parts[0].parse().ok()?,
            index: parts[1].parse().ok()?,
            instance_seed: parts[2].parse().ok()?,
            gamma: parts[3].parse().ok()?,
            p_inf: opt(parts[4])?,
            gamma_width: opt(parts[5])?,
            frac_width: opt(parts[6])?,
            window_avg: opt(parts[7])?,
            mixing_time: opt(parts[8])?,
            energy_margin: opt(parts[9])?,
            wall_ms: parts[10].parse().ok()?,
        })
    }
}

/// Per-size summary of one observable column.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableAggregate {
    pub mean: f64,
    pub stderr: f64,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: u32,
    pub observables: BTreeMap<String, ObservableAggregate>,
}

#[derive(Debug, Clone)]
pub struct EnsembleRecord {
    pub spec: EnsembleSpec,
    pub rows: Vec<EnsembleRow>,
    pub aggregates: Vec<Aggregate>,
    pub dir: PathBuf,
}

fn column(row: &EnsembleRow, name: &str) -> Option<f64> {
    match name {
        "gamma" => Some(row.gamma),
        "p_inf" => row.p_inf,
        "gamma_width" => row.gamma_width,
        "frac_width" => row.frac_width,
        "window_avg" => row.window_avg,
        "mixing_time" => row.mixing_time,
        "energy_margin" => row.energy_margin,
        "wall_ms" => Some(row.wall_ms),
        _ => None,
    }
}

pub const OBSERVABLE_COLUMNS: &[&str] = &[
    "gamma",
    "p_inf",
    "gamma_width",
    "frac_width",
    "window_avg",
    "mixing_time",
    "energy_margin",
];

fn compute_aggregates(spec: &EnsembleSpec, rows: &[EnsembleRow]) -> Vec<Aggregate> {
    spec.n_values
        .iter()
        .map(|&n| {
            let mut observables = BTreeMap::new();
            for &col in OBSERVABLE_COLUMNS {
                let values: Vec<f64> = rows
                    .iter()
                    .filter(|r| r.n == n)
                    .filter_map(|r| column(r, col))
                    .collect();
                if values.is_empty() {
                    continue;
                }
                let count = values.len() as u64;
                let mean = values.iter().sum::<f64>() / count as f64;
                let stderr = if count > 1 {
                    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                        / (count as f64 - 1.0);
                    (var / count as f64).sqrt()
                } else {
                    0.0
                };
                observables.insert(col.to_string(), ObservableAggregate { mean, stderr, count });
            }
            Aggregate { n, observables }
        })
        .collect()
}

impl EnsembleRecord {
    /// Values of one observable column for one size, in instance order.
    pub fn values(&self, n: u32, observable: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.n == n)
            .filter_map(|r| column(r, observable))
            .collect()
    }

    pub fn aggregate(&self, n: u32, observable: &str) -> Option<&ObservableAggregate> {
        self.aggregates
            .iter()
            .find(|a| a.n == n)
            .and_then(|a| a.observables.get(observable))
    }

    /// Load a completed (or partially completed) record directory.
    pub fn load(dir: &Path) -> Result<EnsembleRecord> {
        let spec: EnsembleSpec = serde_json::from_str(&fs::read_to_string(dir.join("spec.json"))?)?;
        let rows = read_rows(&dir.join("rows.csv"))?;
        let aggregates = compute_aggregates(&spec, &rows);
        Ok(EnsembleRecord {
            spec,
            rows,
            aggregates,
            dir: dir.to_path_buf(),
        })
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() as u64 == self.spec.n_values.len() as u64 * self.spec.instances_per_n
    }
}

fn read_rows(path: &Path) -> Result<Vec<EnsembleRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // header
        }
        match EnsembleRow::parse_csv(line) {
            Some(row) => rows.push(row),
            // A torn tail from an interrupted write is recomputed; anything
            // unparseable after it is ignored the same way.
            None => break,
        }
    }
    Ok(rows)
}

/// Per-size hopping rate for the non-scan policies.
fn policy_gamma(spec: &EnsembleSpec, n: u32) -> Result<Option<f64>> {
    match spec.gamma_policy {
        GammaPolicy::OptimalScan => Ok(None),
        GammaPolicy::Fixed { gamma } => Ok(Some(gamma)),
        GammaPolicy::HeuristicMeasured => {
            let spread_master = per_n_master(spec.master_seed, n);
            let g = match spec.graph {
                Graph::Hypercube => heuristic_gamma(
                    spec.model,
                    n,
                    spec.omega,
                    SpreadSource::Measured {
                        master_seed: spread_master,
                        count: spec.instances_per_n,
                    },
                )?,
                Graph::Complete => {
                    let spread = crate::gamma::measure_energy_spread(
                        spec.model,
                        n,
                        spec.omega,
                        spec.instances_per_n,
                        spread_master,
                    )?;
                    energy_balance_rate(Graph::Complete, n, spread)
                }
            };
            Ok(Some(g))
        }
        GammaPolicy::HeuristicAnalytic => {
            let (_, spread) = crate::problems::spectrum_stats(spec.model, n, spec.omega)?;
            Ok(Some(energy_balance_rate(spec.graph, n, spread)))
        }
    }
}

fn compute_row(spec: &EnsembleSpec, n: u32, index: u64, fixed_gamma: Option<f64>) -> Result<EnsembleRow> {
    let start = Instant::now();
    let seed = instance_seed(per_n_master(spec.master_seed, n), index);
    let inst = generate(spec.model, n, seed, spec.omega)?;

    let mut row = EnsembleRow {
        n,
        index,
        instance_seed: seed,
        gamma: f64::NAN,
        p_inf: None,
        gamma_width: None,
        frac_width: None,
        window_avg: None,
        mixing_time: None,
        energy_margin: None,
        wall_ms: 0.0,
    };

    let wants = |probe: fn(&ObservableSpec) -> bool| spec.observables.iter().any(probe);

    match spec.gamma_policy {
        GammaPolicy::OptimalScan => {
            let scan = scan_gamma(&inst, spec.graph, &spec.grid)?;
            row.gamma = scan.gamma_opt;
            if wants(|o| matches!(o, ObservableSpec::PInf)) {
                row.p_inf = Some(scan.p_opt);
            }
            if wants(|o| matches!(o, ObservableSpec::GammaWidth)) {
                row.gamma_width = Some(scan.width);
                row.frac_width = Some(scan.fractional_width);
            }
        }
        _ => {
            row.gamma = fixed_gamma.expect("non-scan policies precompute gamma");
            if wants(|o| matches!(o, ObservableSpec::PInf)) {
                row.p_inf = Some(p_infinity_for_instance(&inst, spec.graph, row.gamma)?);
            }
        }
    }

    let needs_dynamics = spec.observables.iter().any(|o| {
        matches!(
            o,
            ObservableSpec::WindowAvg { .. }
                | ObservableSpec::MixingTime { .. }
                | ObservableSpec::EnergyMargin { .. }
        )
    });
    if needs_dynamics {
        let h = build_for_instance(&inst, spec.graph, row.gamma)?;
        let psi0 = h.start_state();
        let prop = PropagationConfig::default();
        for obs in &spec.observables {
            match *obs {
                ObservableSpec::WindowAvg { window } => {
                    let (t, dt) = window.bounds(n, spec.omega);
                    row.window_avg = Some(window_average(&*h, &psi0, t, dt, &prop)?);
                }
                ObservableSpec::MixingTime { epsilon } => {
                    let mixing = MixingConfig {
                        epsilon,
                        ..MixingConfig::for_omega(spec.omega)
                    };
                    row.mixing_time = Some(mixing_time(&*h, &psi0, &mixing, &prop)?.tau);
                }
                ObservableSpec::EnergyMargin { t_max_over_omega } => {
                    let trace = energy_trace(&*h, &psi0, t_max_over_omega / spec.omega, &prop)?;
                    let initial = trace.problem_expect[0];
                    let mut running = 0.0;
                    let mut min_margin = f64::INFINITY;
                    for i in 1..trace.times.len() {
                        let dt = trace.times[i] - trace.times[i - 1];
                        running +=
                            0.5 * (trace.problem_expect[i] + trace.problem_expect[i - 1]) * dt;
                        if i >= 2 {
                            min_margin = min_margin.min(initial - running / trace.times[i]);
                        }
                    }
                    row.energy_margin = Some(min_margin);
                }
                ObservableSpec::PInf | ObservableSpec::GammaWidth => {}
            }
        }
    }

    row.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

struct OrderedWriter {
    file: fs::File,
    next: usize,
    pending: BTreeMap<usize, EnsembleRow>,
    rows: Vec<EnsembleRow>,
}

impl OrderedWriter {
    fn push(&mut self, idx: usize, row: EnsembleRow) -> Result<()> {
        self.pending.insert(idx, row);
        while let Some(row) = self.pending.remove(&self.next) {
            writeln!(self.file, "{}", row.to_csv())?;
            self.rows.push(row);
            self.next += 1;
        }
        self.file.flush()?;
        Ok(())
    }
}

/// Run (or resume) an ensemble into a record directory.
///
/// Rows are committed to `rows.csv` in instance order regardless of worker
/// completion order, so re-running with the same spec yields an identical
/// file, and killing the process at any point loses at most the rows not
/// yet committed.
pub fn run_ensemble(spec: &EnsembleSpec, dir: &Path, resume: bool) -> Result<EnsembleRecord> {
    spec.validate()?;
    fs::create_dir_all(dir)?;
    let spec_path = dir.join("spec.json");
    if spec_path.exists() {
        let existing: EnsembleSpec = serde_json::from_str(&fs::read_to_string(&spec_path)?)?;
        if &existing != spec {
            return Err(Error::InvalidInput(format!(
                "record at {} holds a different spec",
                dir.display()
            )));
        }
        if !resume {
            return Err(Error::InvalidInput(format!(
                "record at {} already exists; pass resume to continue it",
                dir.display()
            )));
        }
    } else {
        fs::write(&spec_path, serde_json::to_string_pretty(spec)?)?;
    }

    let jobs = spec.jobs();
    let rows_path = dir.join("rows.csv");
    let existing = read_rows(&rows_path)?;
    let done = existing.len().min(jobs.len());
    for (i, row) in existing.iter().take(done).enumerate() {
        if (row.n, row.index) != jobs[i] {
            return Err(Error::InvalidInput(format!(
                "row {i} of {} does not match the job order",
                rows_path.display()
            )));
        }
    }

    // Rewrite the prefix cleanly (drops any torn tail), then append.
    {
        let mut f = fs::File::create(&rows_path)?;
        writeln!(f, "{ROW_HEADER}")?;
        for row in existing.iter().take(done) {
            writeln!(f, "{}", row.to_csv())?;
        }
        f.flush()?;
    }

    let mut gamma_per_n: BTreeMap<u32, Option<f64>> = BTreeMap::new();
    for &n in &spec.n_values {
        gamma_per_n.insert(n, policy_gamma(spec, n)?);
    }

    let file = fs::OpenOptions::new().append(true).open(&rows_path)?;
    let writer = Mutex::new(OrderedWriter {
        file,
        next: done,
        pending: BTreeMap::new(),
        rows: existing.into_iter().take(done).collect(),
    });

    let remaining: Vec<(usize, (u32, u64))> =
        jobs.iter().cloned().enumerate().skip(done).collect();
    remaining
        .par_iter()
        .map(|&(i, (n, index))| {
            let row = compute_row(spec, n, index, gamma_per_n[&n])?;
            writer.lock().unwrap().push(i, row)
        })
        .collect::<Result<Vec<()>>>()?;

    let writer = writer.into_inner().unwrap();
    let rows = writer.rows;
    let aggregates = compute_aggregates(spec, &rows);
    fs::write(
        dir.join("aggregates.json"),
        serde_json::to_string_pretty(&aggregates)?,
    )?;
    Ok(EnsembleRecord {
        spec: spec.clone(),
        rows,
        aggregates,
        dir: dir.to_path_buf(),
    })
}

// ---------------------------------------------------------------------------
// Scaling fits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axes {
    /// `log2(observable)` against `n`.
    LogLin,
    /// `log2(observable)` against `log2(n)`.
    LogLog,
}

impl Axes {
    pub fn parse(s: &str) -> Result<Axes> {
        match s.to_ascii_lowercase().as_str() {
            "loglin" => Ok(Axes::LogLin),
            "loglog" => Ok(Axes::LogLog),
            other => Err(Error::InvalidInput(format!("unknown axes '{other}'"))),
        }
    }
}

/// Unweighted least-squares line with standard errors from the residual
/// variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub slope_stderr: f64,
    pub intercept: f64,
    pub intercept_stderr: f64,
    pub axes: Axes,
    pub observable: String,
    /// The fitted points `(x, y)`.
    pub points: Vec<(f64, f64)>,
    pub residuals: Vec<f64>,
}

/// Fit a line through `(x(n), log2 mean_n(observable))`.
pub fn fit_scaling(record: &EnsembleRecord, observable: &str, axes: Axes) -> Result<FitResult> {
    let mut points = Vec::new();
    for agg in &record.aggregates {
        if let Some(obs) = agg.observables.get(observable) {
            if obs.mean > 0.0 {
                let x = match axes {
                    Axes::LogLin => agg.n as f64,
                    Axes::LogLog => (agg.n as f64).log2(),
                };
                points.push((x, obs.mean.log2()));
            }
        }
    }
    fit_line(points, axes, observable)
}

/// Fit a line through explicit points.
pub fn fit_line(points: Vec<(f64, f64)>, axes: Axes, observable: &str) -> Result<FitResult> {
    let m = points.len();
    if m < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 sizes for a scaling fit, have {m}"
        )));
    }
    let mf = m as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / mf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / mf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.0 - mean_x)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("degenerate x values".into()));
    }
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residuals: Vec<f64> = points.iter().map(|p| p.1 - (slope * p.0 + intercept)).collect();
    let dof = (mf - 2.0).max(1.0);
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let slope_stderr = (s2 / sxx).sqrt();
    let intercept_stderr = (s2 * (1.0 / mf + mean_x * mean_x / sxx)).sqrt();
    Ok(FitResult {
        slope,
        slope_stderr,
        intercept,
        intercept_stderr,
        axes,
        observable: observable.to_string(),
        points,
        residuals,
    })
}
