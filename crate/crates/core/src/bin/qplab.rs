//! Command-line front end: one subcommand per task plus `sweep`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 task failures.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use qplab::cocycle::lyapunov_curve;
use qplab::dynamics::{evolve, log_time_grid, moments, plateau_ratio, strong_dl_metric_jittered, transport_exponent};
use qplab::harness::{self, fmt_float, Format, SweepConfig};
use qplab::kickedrotor::{rotor_run, KickedRotorSpec};
use qplab::localization::{localization_report, LocalizationOptions};
use qplab::model::{OperatorSpec, GOLDEN_MEAN};
use qplab::spectra::{build_finite, butterfly, duality_check, point_spectrum, BoundaryCondition};
use qplab::Error;

#[derive(Parser)]
#[command(name = "qplab", version, about = "Quasiperiodic Schrödinger operator laboratory")]
struct Cli {
    /// JSON file: an operator spec (task subcommands) or a sweep config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutFormat>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for the θ-sample jitter (recorded in the output).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bc {
    Dirichlet,
    Periodic,
    Antiperiodic,
}

impl From<Bc> for BoundaryCondition {
    fn from(b: Bc) -> Self {
        match b {
            Bc::Dirichlet => BoundaryCondition::Dirichlet,
            Bc::Periodic => BoundaryCondition::Periodic,
            Bc::Antiperiodic => BoundaryCondition::Antiperiodic,
        }
    }
}

/// Almost Mathieu shorthand, used when no `--config` is given; any flag
/// given alongside `--config` overrides the file.
#[derive(Args, Clone)]
struct OperatorArgs {
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Lyapunov exponent over an energy grid (CSV: energy, gamma, stderr).
    Lyapunov {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = -4.0)]
        e_min: f64,
        #[arg(long, default_value_t = 4.0)]
        e_max: f64,
        #[arg(long, default_value_t = 81)]
        e_points: usize,
        #[arg(short, long, default_value_t = 1000)]
        k: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
    },
    /// Finite-section eigenvalues (CSV: index, E).
    Spectrum {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Bc::Dirichlet)]
        bc: Bc,
    },
    /// Band spectra for all p/q with q ≤ q_max (CSV: p, q, band_lo, band_hi).
    Butterfly {
        #[arg(long, default_value_t = 2.0)]
        lambda: f64,
        #[arg(long, default_value_t = 30)]
        q_max: u64,
        #[arg(long, default_value_t = 8)]
        theta_samples: usize,
    },
    /// Eigenstate localization table (CSV) and summary (JSON on stderr or --summary).
    Localize {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 500)]
        n: usize,
        /// Energy window `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        e_window: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.05)]
        threshold: f64,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Wave-packet spreading from δ₀ (CSV: t, x2_instant, x2_avg).
    Evolve {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, default_value_t = 1000.0)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        tpoints: usize,
        /// Phase samples for the strong-DL metric (0 skips it).
        #[arg(long, default_value_t = 0)]
        theta_samples: usize,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Aubry duality check (JSON report).
    Duality {
        #[arg(long, default_value_t = 4.0)]
        lambda: f64,
        #[arg(long, default_value_t = GOLDEN_MEAN)]
        omega: f64,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 32)]
        samples: usize,
    },
    /// Kicked-rotor run (CSV: t, n2, saturation).
    Kicked {
        #[arg(long, default_value_t = 0.5)]
        kappa: f64,
        #[arg(long, default_value_t = GOLDEN_MEAN / 2.0)]
        a: f64,
        #[arg(long, default_value_t = 0.3)]
        b: f64,
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        periods: usize,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Parameter sweep described by --config.
    Sweep,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Config(String),
    Task(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Spec(_)
            | Error::Domain(_)
            | Error::Json(_)
            | Error::Refused(_)
            | Error::Unsupported(_)
            | Error::Size { .. } => Failure::Config(e.to_string()),
            Error::Numerical(_) | Error::Io { .. } => Failure::Task(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Task(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn operator(cli: &Cli, args: &OperatorArgs) -> Result<OperatorSpec, Failure> {
    let mut spec = match &cli.config {
        Some(path) => OperatorSpec::from_json(&read(path)?)?,
        None => OperatorSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.0)?,
    };
    if let Some(l) = args.lambda {
        spec.coupling = l;
    }
    if let Some(w) = args.omega {
        spec.frequency = qplab::model::FrequencyVector::scalar(qplab::model::frac(w))?;
    }
    if let Some(t) = args.theta {
        spec.phase[0] = qplab::model::frac(t);
    }
    spec.validate()?;
    Ok(spec)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Writes `text` to `path`, or stdout when absent.
fn write_to(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Task(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Task(e.to_string())),
    }
}

fn write_summary(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("summary serialises") + "\n";
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Task(format!("{}: {e}", p.display()))),
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

/// CSV text: a `# config:` line echoing the resolved inputs, the header and
/// the rows.
fn csv_table(
    config: &serde_json::Value,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(format!("# config: {config}\n").into_bytes());
    let fail = |e: csv::Error| Failure::Task(e.to_string());
    w.write_record(header).map_err(fail)?;
    for r in rows {
        w.write_record(&r).map_err(fail)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Failure::Task(e.to_string()))?).map_err(|e| Failure::Task(e.to_string()))
}

fn json_mode(cli: &Cli) -> bool {
    matches!(cli.format, Some(OutFormat::Json))
}

fn seed_jitter(cli: &Cli, samples: usize) -> f64 {
    use rand::{Rng, SeedableRng};
    match cli.seed {
        Some(s) => rand_chacha::ChaCha8Rng::seed_from_u64(s).random::<f64>() / samples.max(1) as f64,
        None => 0.0,
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(w) = cli.workers {
        // a global pool may already exist in tests; the setting is best effort
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Lyapunov { op, e_min, e_max, e_points, k, samples } => {
            let spec = operator(cli, op)?;
            if *e_points == 0 {
                return Err(Failure::Config("need at least one energy".into()));
            }
            let energies: Vec<f64> = (0..*e_points)
                .map(|i| if *e_points == 1 { *e_min } else { e_min + (e_max - e_min) * i as f64 / (*e_points - 1) as f64 })
                .collect();
            let curve = lyapunov_curve(&spec, &energies, *k, *samples)?;
            let config = json!({ "operator": spec, "k": k, "samples": samples });
            if json_mode(cli) {
                write_to(out, &(serde_json::to_string_pretty(&json!({ "config": config, "curve": curve })).unwrap() + "\n"))
            } else {
                let rows = curve.iter().map(|e| vec![fmt_float(e.energy), fmt_float(e.gamma), fmt_float(e.stderr)]);
                write_to(out, &csv_table(&config, &["energy", "gamma", "stderr"], rows)?)
            }
        }
        Command::Spectrum { op, n, bc } => {
            let spec = operator(cli, op)?;
            let s = point_spectrum(&build_finite(&spec, *n, (*bc).into())?)?;
            let config = json!({ "operator": spec, "N": n, "boundary": BoundaryCondition::from(*bc) });
            if json_mode(cli) {
                write_to(out, &(serde_json::to_string_pretty(&json!({ "config": config, "spectrum": s })).unwrap() + "\n"))
            } else {
                let ev = s.eigenvalues().expect("point spectrum");
                let rows = ev.iter().enumerate().map(|(i, e)| vec![i.to_string(), fmt_float(*e)]);
                write_to(out, &csv_table(&config, &["index", "E"], rows)?)
            }
        }
        Command::Butterfly { lambda, q_max, theta_samples } => {
            let f = match &cli.config {
                Some(path) => OperatorSpec::from_json(&read(path)?)?.potentials[0].clone(),
                None => qplab::model::FourierPotential::cosine(),
            };
            let rows = butterfly(*lambda, &f, *q_max, *theta_samples);
            let config = json!({ "coupling": lambda, "potential": f, "q_max": q_max, "theta_samples": theta_samples });
            let failures: Vec<String> =
                rows.iter().filter_map(|r| r.bands.as_ref().err().map(|e| format!("{}/{}: {e}", r.p, r.q))).collect();
            if json_mode(cli) {
                write_to(out, &(serde_json::to_string_pretty(&json!({ "config": config, "rows": rows })).unwrap() + "\n"))?;
            } else {
                let table = rows.iter().flat_map(|r| {
                    r.bands.iter().flatten().map(move |b| {
                        vec![r.p.to_string(), r.q.to_string(), fmt_float(b.lo), fmt_float(b.hi)]
                    })
                });
                write_to(out, &csv_table(&config, &["p", "q", "band_lo", "band_hi"], table)?)?;
            }
            if failures.is_empty() {
                Ok(())
            } else {
                Err(Failure::Task(format!("{} rational(s) failed: {}", failures.len(), failures.join("; "))))
            }
        }
        Command::Localize { op, n, e_window, threshold, summary } => {
            let spec = operator(cli, op)?;
            let window = e_window.as_ref().map(|w| (w[0], w[1]));
            let opts = LocalizationOptions { decay_threshold: *threshold, ..Default::default() };
            let r = localization_report(&spec, *n, window, &opts)?;
            let config = json!({ "operator": spec, "N": n, "window": window, "options": opts });
            let rows = r.states.iter().map(|s| {
                vec![
                    s.index.to_string(),
                    fmt_float(s.profile.energy),
                    s.center_site.to_string(),
                    fmt_float(s.profile.decay_rate),
                    fmt_float(s.profile.fit_r2),
                    fmt_float(s.profile.ipr),
                    s.interior.to_string(),
                    s.localized.to_string(),
                ]
            });
            write_to(out, &csv_table(&config, &["index", "E", "center", "decay_rate", "fit_r2", "ipr", "interior", "localized"], rows)?)?;
            write_summary(
                summary.as_deref(),
                &json!({
                    "operator": spec,
                    "N": r.half_width,
                    "window": [r.window.0, r.window.1],
                    "options": r.options,
                    "fraction_localized": r.fraction_localized,
                    "mean_decay": r.mean_decay,
                    "mean_ipr": r.mean_ipr,
                    "interior_count": r.interior_count,
                    "localized_count": r.localized_count,
                }),
            )
        }
        Command::Evolve { op, n, tmax, tpoints, theta_samples, summary } => {
            let spec = operator(cli, op)?;
            let times = log_time_grid(*tmax, *tpoints)?;
            let run = evolve(&spec, *n, None, &times, false)?;
            let series = moments(&run)?;
            let config = json!({ "operator": spec, "N": n, "t_max": tmax, "points": tpoints, "seed": cli.seed });
            let rows = (0..series.times.len()).map(|k| {
                vec![fmt_float(series.times[k]), fmt_float(series.x2_instant[k]), fmt_float(series.x2_avg[k])]
            });
            write_to(out, &csv_table(&config, &["t", "x2_instant", "x2_avg"], rows)?)?;
            let fit = transport_exponent(&series, (tmax / 10.0, *tmax)).ok();
            let sdl = if *theta_samples > 0 {
                let j = seed_jitter(cli, *theta_samples);
                Some(strong_dl_metric_jittered(&spec, *n, *theta_samples, *tmax, *tpoints, j)?)
            } else {
                None
            };
            write_summary(
                summary.as_deref(),
                &json!({
                    "operator": spec,
                    "N": n,
                    "t_max": tmax,
                    "boundary_mass_max": run.boundary_mass_max,
                    "transport_fit": fit,
                    "plateau_ratio": plateau_ratio(&series),
                    "strong_dl": sdl,
                    "seed": cli.seed,
                }),
            )
        }
        Command::Duality { lambda, omega, n, samples } => {
            let report = duality_check(*lambda, *omega, *n, *samples)?;
            let mut value = serde_json::to_value(&report).expect("report serialises");
            value["omega"] = json!(omega);
            write_to(out, &(serde_json::to_string_pretty(&value).unwrap() + "\n"))
        }
        Command::Kicked { kappa, a, b, n, periods, summary } => {
            let spec = KickedRotorSpec::new(*kappa, *a, *b)?;
            let run = rotor_run(spec, *n, *periods, None)?;
            let running = run.running_saturation();
            let config = json!({ "rotor": spec, "N": n, "periods": periods });
            let rows = (0..run.times.len()).map(|t| {
                vec![
                    t.to_string(),
                    fmt_float(run.n2[t]),
                    running[t].map(fmt_float).unwrap_or_default(),
                ]
            });
            write_to(out, &csv_table(&config, &["t", "n2", "saturation"], rows)?)?;
            write_summary(
                summary.as_deref(),
                &json!({
                    "rotor": spec,
                    "N": n,
                    "periods": periods,
                    "norm_drift": run.norm_drift,
                    "boundary_mass_max": run.boundary_mass_max,
                    "flagged_at": run.flagged_at,
                    "saturation": run.saturation(true),
                    "saturation_instantaneous": run.saturation(false),
                    "recommended_min_n": spec.horizon(*periods),
                }),
            )
        }
        Command::Sweep => {
            let path = cli.config.as_deref().ok_or_else(|| Failure::Config("sweep needs --config".into()))?;
            let mut config = SweepConfig::from_json(&read(path)?)?;
            if let Some(w) = cli.workers {
                config.workers = w;
            }
            if let Some(s) = cli.seed {
                config.seed = Some(s);
            }
            if let Some(f) = cli.format {
                config.format = match f {
                    OutFormat::Csv => Format::Csv,
                    OutFormat::Json => Format::Json,
                };
            }
            if let Some(o) = &cli.out {
                config.output = Some(o.clone());
            }
            let result = harness::run_sweep(&config)?;
            match &config.output {
                Some(p) => harness::emit(&result, config.format, p)?,
                None => {
                    let stdout = std::io::stdout();
                    match config.format {
                        Format::Csv => harness::write_csv(&result, stdout.lock()).map_err(|e| Failure::Task(e.to_string()))?,
                        Format::Json => write_to(None, &(harness::to_json(&result)? + "\n"))?,
                    }
                }
            }
            match result.failures() {
                0 => Ok(()),
                k => Err(Failure::Task(format!("{k} of {} sweep tasks failed", result.records.len()))),
            }
        }
    }
}
