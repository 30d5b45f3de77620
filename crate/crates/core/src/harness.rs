//! Parameter sweeps, deterministic aggregation and CSV/JSON emission.
//!
//! A sweep expands up to three axes into a row-major grid, runs one task per
//! grid point on a dedicated thread pool and returns records in grid order,
//! whatever the scheduling. Task panics are caught and become error records.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::lyapunov_theta_avg_jittered;
use crate::dynamics::{evolve, log_time_grid, moments, transport_exponent};
use crate::error::{Error, Result};
use crate::kickedrotor::{rotor_run, KickedRotorSpec};
use crate::localization::{localization_report, LocalizationOptions};
use crate::model::{frac, FrequencyVector, OperatorSpec};
use crate::spectra::{build_finite, eigvals, BoundaryCondition};

/// Default cap on the number of grid points in one sweep.
pub const DEFAULT_BUDGET: usize = 100_000;

/// Most axes a sweep may have.
pub const MAX_AXES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Coupling,
    Omega,
    Theta,
    Energy,
    Kappa,
    A,
    B,
}

impl AxisName {
    pub fn as_str(&self) -> &'static str {
        match self {
            AxisName::Coupling => "coupling",
            AxisName::Omega => "omega",
            AxisName::Theta => "theta",
            AxisName::Energy => "energy",
            AxisName::Kappa => "kappa",
            AxisName::A => "a",
            AxisName::B => "b",
        }
    }

    fn is_rotor(&self) -> bool {
        matches!(self, AxisName::Kappa | AxisName::A | AxisName::B)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: AxisName,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl Axis {
    /// Grid values, endpoints included (`lo` alone for one point).
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let last = (self.points - 1) as f64;
        match self.scale {
            Scale::Linear => (0..self.points).map(|i| self.lo + (self.hi - self.lo) * i as f64 / last).collect(),
            Scale::Log => {
                let (a, b) = (self.lo.ln(), self.hi.ln());
                (0..self.points).map(|i| (a + (b - a) * i as f64 / last).exp()).collect()
            }
        }
    }
}

fn default_k() -> usize {
    1000
}
fn default_samples() -> usize {
    64
}
fn default_n() -> usize {
    200
}
fn default_t_max() -> f64 {
    1000.0
}
fn default_time_points() -> usize {
    200
}
fn default_threshold() -> f64 {
    0.05
}
fn default_rotor_n() -> usize {
    1024
}
fn default_periods() -> usize {
    1000
}

/// Task run at every grid point, with its options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    /// θ-averaged Lyapunov exponent at one energy (sweep `energy` for a curve).
    LyapunovCurve {
        #[serde(default)]
        energy: f64,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Finite-section spectrum summary.
    Spectrum {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default)]
        boundary: BoundaryCondition,
    },
    /// Localization report summary.
    Localize {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    /// Wave-packet spreading with a transport-exponent fit.
    Evolve {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default = "default_time_points")]
        points: usize,
        /// Fit window; defaults to the last decade `[T/10, T]`.
        #[serde(default)]
        window: Option<(f64, f64)>,
    },
    /// Kicked-rotor run.
    Kicked {
        #[serde(default = "default_rotor_n")]
        n: usize,
        #[serde(default = "default_periods")]
        periods: usize,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::LyapunovCurve { .. } => "lyapunov-curve",
            TaskSpec::Spectrum { .. } => "spectrum",
            TaskSpec::Localize { .. } => "localize",
            TaskSpec::Evolve { .. } => "evolve",
            TaskSpec::Kicked { .. } => "kicked",
        }
    }

    /// Names of the summary scalars, in record order.
    pub fn fields(&self) -> &'static [&'static str] {
        match self {
            TaskSpec::LyapunovCurve { .. } => &["gamma", "stderr"],
            TaskSpec::Spectrum { .. } => &["e_min", "e_max", "dim", "ids_at_zero"],
            TaskSpec::Localize { .. } => &["fraction_localized", "mean_decay", "mean_ipr", "interior_count"],
            TaskSpec::Evolve { .. } => &["beta", "beta_stderr", "x2_avg_final", "boundary_mass_max"],
            TaskSpec::Kicked { .. } => &["n2_final", "n2_avg_final", "saturation", "norm_drift"],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

fn default_workers() -> usize {
    0
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}

/// Complete sweep description (the JSON accepted by `qplab sweep`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base operator for all tasks except `kicked`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    /// Base rotor for the `kicked` task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotor: Option<KickedRotorSpec>,
    #[serde(default)]
    pub axes: Vec<Axis>,
    pub task: TaskSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Worker threads; 0 uses every available core.
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Seeds the θ-grid jitter of Lyapunov tasks (no jitter when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: SweepConfig = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    /// Number of grid points.
    pub fn task_count(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    /// Rejects schema violations before any work is done.
    pub fn validate(&self) -> Result<()> {
        let kicked = matches!(self.task, TaskSpec::Kicked { .. });
        match (kicked, &self.operator, &self.rotor) {
            (true, _, None) => return Err(Error::spec("the kicked task needs a `rotor` block")),
            (false, None, _) => return Err(Error::spec(format!("the {} task needs an `operator` block", self.task.name()))),
            _ => {}
        }
        if let Some(op) = &self.operator {
            op.validate()?;
        }
        if let Some(r) = &self.rotor {
            r.validate()?;
        }
        if self.axes.len() > MAX_AXES {
            return Err(Error::spec(format!("at most {MAX_AXES} axes, got {}", self.axes.len())));
        }
        for (i, a) in self.axes.iter().enumerate() {
            if self.axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::spec(format!("axis `{}` appears twice", a.name.as_str())));
            }
            if a.points == 0 {
                return Err(Error::spec(format!("axis `{}` has no points", a.name.as_str())));
            }
            if !(a.lo.is_finite() && a.hi.is_finite()) {
                return Err(Error::spec(format!("axis `{}` has non-finite bounds", a.name.as_str())));
            }
            if a.scale == Scale::Log && !(a.lo > 0.0 && a.hi > 0.0) {
                return Err(Error::spec(format!("log axis `{}` needs positive bounds", a.name.as_str())));
            }
            if a.name.is_rotor() != kicked {
                return Err(Error::spec(format!(
                    "axis `{}` does not apply to the {} task",
                    a.name.as_str(),
                    self.task.name()
                )));
            }
            if a.name == AxisName::Energy && !matches!(self.task, TaskSpec::LyapunovCurve { .. }) {
                return Err(Error::spec("the energy axis applies to the lyapunov-curve task only"));
            }
            if a.name == AxisName::Coupling && a.lo.min(a.hi) < 0.0 {
                return Err(Error::spec("coupling axis must be non-negative"));
            }
            if a.name == AxisName::Kappa && a.lo.min(a.hi) < 0.0 {
                return Err(Error::spec("kappa axis must be non-negative"));
            }
        }
        if matches!(self.operator.as_ref().map(|o| o.frequency.dim()), Some(d) if d > 1)
            && self.axes.iter().any(|a| a.name == AxisName::Omega)
        {
            return Err(Error::spec("the omega axis needs a scalar frequency"));
        }
        let count = self.task_count();
        if count > self.budget {
            return Err(Error::spec(format!("{count} grid points exceed the budget of {}", self.budget)));
        }
        Ok(())
    }

    /// θ-grid jitter derived from the seed, in `[0, 1/samples)`.
    pub fn jitter(&self) -> f64 {
        match (self.seed, &self.task) {
            (Some(seed), TaskSpec::LyapunovCurve { samples, .. }) => {
                ChaCha8Rng::seed_from_u64(seed).random::<f64>() / (*samples).max(1) as f64
            }
            _ => 0.0,
        }
    }

    /// Row-major grid (last axis fastest); one empty tuple without axes.
    pub fn grid(&self) -> Vec<Vec<f64>> {
        let mut grid = vec![vec![]];
        for axis in &self.axes {
            let vals = axis.values();
            grid = grid
                .into_iter()
                .flat_map(|p| {
                    vals.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        grid
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Completed, but a validity check failed (e.g. boundary mass).
    Flagged,
    Error,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Flagged => "flagged",
            Status::Error => "error",
        }
    }
}

/// Summary scalars of one task and whether it passed its validity checks.
#[derive(Clone, Debug, PartialEq)]
pub struct TaskOutput {
    pub values: Vec<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    /// Axis values, in axis order.
    pub params: Vec<f64>,
    /// Summary values, in [`SweepResult::fields`] order (empty on error).
    pub values: Vec<f64>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    /// Seed-derived θ jitter actually used.
    pub jitter: f64,
    pub axes: Vec<String>,
    pub fields: Vec<String>,
    pub records: Vec<SweepRecord>,
}

impl SweepResult {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == Status::Error).count()
    }

    /// Value of summary field `name` in record `i`.
    pub fn value(&self, i: usize, name: &str) -> Option<f64> {
        let k = self.fields.iter().position(|f| f == name)?;
        self.records.get(i)?.values.get(k).copied()
    }
}

/// Runs `task` on every grid point with `workers` threads (0 = all cores),
/// returning records in grid order. Errors and panics become error records.
pub fn execute_grid<F>(grid: &[Vec<f64>], workers: usize, task: F) -> Result<Vec<SweepRecord>>
where
    F: Fn(&[f64]) -> Result<TaskOutput> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| {
        grid.par_iter()
            .map(|params| {
                let start = Instant::now();
                let outcome = catch_unwind(AssertUnwindSafe(|| task(params)));
                let wall_ms = start.elapsed().as_secs_f64() * 1e3;
                let (values, status, message) = match outcome {
                    Ok(Ok(out)) => (out.values, if out.flagged { Status::Flagged } else { Status::Ok }, None),
                    Ok(Err(e)) => (vec![], Status::Error, Some(e.to_string())),
                    Err(panic) => {
                        let msg = panic
                            .downcast_ref::<&str>()
                            .map(|s| s.to_string())
                            .or_else(|| panic.downcast_ref::<String>().cloned())
                            .unwrap_or_else(|| "task panicked".into());
                        (vec![], Status::Error, Some(format!("panic: {msg}")))
                    }
                };
                SweepRecord { params: params.clone(), values, status, message, wall_ms }
            })
            .collect()
    }))
}

/// Validates `config` and runs the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    let grid = config.grid();
    let jitter = config.jitter();
    let records = execute_grid(&grid, config.workers, |p| run_point(config, p, jitter))?;
    Ok(SweepResult {
        config: config.clone(),
        jitter,
        axes: config.axes.iter().map(|a| a.name.as_str().to_string()).collect(),
        fields: config.task.fields().iter().map(|s| s.to_string()).collect(),
        records,
    })
}

/// Runs the configured task at one grid point.
pub fn run_point(config: &SweepConfig, params: &[f64], jitter: f64) -> Result<TaskOutput> {
    let mut op = config.operator.clone();
    let mut rotor = config.rotor;
    let mut energy_override = None;
    for (axis, &v) in config.axes.iter().zip(params) {
        match axis.name {
            AxisName::Coupling => op.as_mut().expect("validated").coupling = v,
            AxisName::Omega => op.as_mut().expect("validated").frequency = FrequencyVector::scalar(frac(v))?,
            AxisName::Theta => op.as_mut().expect("validated").phase[0] = frac(v),
            AxisName::Energy => energy_override = Some(v),
            AxisName::Kappa => rotor.as_mut().expect("validated").kappa = v,
            AxisName::A => rotor.as_mut().expect("validated").a = v,
            AxisName::B => rotor.as_mut().expect("validated").b = v,
        }
    }
    if let Some(op) = &op {
        op.validate()?;
    }
    match &config.task {
        TaskSpec::LyapunovCurve { energy, k, samples } => {
            let e = energy_override.unwrap_or(*energy);
            let est = lyapunov_theta_avg_jittered(op.as_ref().expect("validated"), e, *k, *samples, jitter)?;
            Ok(TaskOutput { values: vec![est.gamma, est.stderr], flagged: false })
        }
        TaskSpec::Spectrum { n, boundary } => {
            let ev = eigvals(&build_finite(op.as_ref().expect("validated"), *n, *boundary)?)?;
            let below = ev.partition_point(|&e| e <= 0.0) as f64 / ev.len() as f64;
            Ok(TaskOutput { values: vec![ev[0], ev[ev.len() - 1], ev.len() as f64, below], flagged: false })
        }
        TaskSpec::Localize { n, threshold } => {
            let opts = LocalizationOptions { decay_threshold: *threshold, ..Default::default() };
            let r = localization_report(op.as_ref().expect("validated"), *n, None, &opts)?;
            Ok(TaskOutput {
                values: vec![r.fraction_localized, r.mean_decay, r.mean_ipr, r.interior_count as f64],
                flagged: r.interior_count == 0,
            })
        }
        TaskSpec::Evolve { n, t_max, points, window } => {
            let times = log_time_grid(*t_max, *points)?;
            let mut run = evolve(op.as_ref().expect("validated"), *n, None, &times, false)?;
            let flagged = !run.valid;
            // report the numbers even for a flagged run; the status marks it
            run.valid = true;
            let s = moments(&run)?;
            let fit = transport_exponent(&s, window.unwrap_or((t_max / 10.0, *t_max)))?;
            Ok(TaskOutput {
                values: vec![fit.beta, fit.stderr, *s.x2_avg.last().expect("non-empty"), run.boundary_mass_max],
                flagged,
            })
        }
        TaskSpec::Kicked { n, periods } => {
            let r = rotor_run(rotor.expect("validated"), *n, *periods, None)?;
            Ok(TaskOutput {
                values: vec![
                    *r.n2.last().expect("non-empty"),
                    *r.n2_avg.last().expect("non-empty"),
                    r.saturation(true).unwrap_or(f64::NAN),
                    r.norm_drift,
                ],
                flagged: r.flagged_at.is_some(),
            })
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes the CSV form: a `# config:` comment line echoing the resolved
/// configuration, a header (axes, summary fields, status, wall_ms, message)
/// and one row per record.
pub fn write_csv<W: Write>(result: &SweepResult, mut out: W) -> std::io::Result<()> {
    let echo = serde_json::to_string(&result.config)?;
    writeln!(out, "# config: {echo}")?;
    writeln!(out, "# jitter: {}", fmt_float(result.jitter))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = result.axes.iter().map(String::as_str).collect();
    header.extend(result.fields.iter().map(String::as_str));
    header.extend(["status", "wall_ms", "message"]);
    w.write_record(&header)?;
    for r in &result.records {
        let mut row: Vec<String> = r.params.iter().map(|&x| fmt_float(x)).collect();
        if r.values.is_empty() {
            row.extend(result.fields.iter().map(|_| String::new()));
        } else {
            row.extend(r.values.iter().map(|&x| fmt_float(x)));
        }
        row.push(r.status.as_str().into());
        row.push(format!("{:.3}", r.wall_ms));
        row.push(r.message.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()
}

/// JSON form: `{config, jitter, axes, fields, records}`. Floats use the
/// shortest representation that parses back to the identical value.
pub fn to_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

/// Writes `result` to `path` in `format`.
pub fn emit(result: &SweepResult, format: Format, path: &Path) -> Result<()> {
    let io = |e| Error::Io { path: path.to_path_buf(), source: e };
    let file = File::create(path).map_err(io)?;
    let mut w = BufWriter::new(file);
    match format {
        Format::Csv => write_csv(result, &mut w).map_err(io)?,
        Format::Json => {
            w.write_all(to_json(result)?.as_bytes()).map_err(io)?;
            w.write_all(b"\n").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
