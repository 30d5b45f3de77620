//! End-to-end acceptance run: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that the criteria execute in
//! order with their own wall-clock budgets; the process exits non-zero when
//! any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use qplab::cocycle::{cocycle_product, cocycle_product_from, lyapunov_curve, lyapunov_theta_avg, CocycleProduct};
use qplab::dynamics::{evolve, log_time_grid, moments, strong_dl_metric, transport_exponent, Propagator};
use qplab::harness::{run_sweep, SweepConfig};
use qplab::kickedrotor::{kick_coefficients, rotor_run, KickedRotorSpec};
use qplab::localization::{localization_report, median, pair_with_lyapunov, LocalizationOptions};
use qplab::model::{FourierPotential, OperatorSpec, GOLDEN_MEAN};
use qplab::spectra::{build_finite, butterfly, duality_check, eigs, BoundaryCondition};

/// ln((3 + √5)/2), evaluated in 30-digit arithmetic.
const CONSTANT_COCYCLE_EXPONENT: f64 = 0.962_423_650_119_206_9;
/// ½ ln 10.
const HALF_LOG_TEN: f64 = 1.151_292_546_497_022_8;

type Check = Result<String, String>;

fn amo(lambda: f64, theta: f64) -> OperatorSpec {
    OperatorSpec::almost_mathieu(lambda, GOLDEN_MEAN, theta).expect("valid operator")
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: qplab::Error) -> String {
    format!("error: {e}")
}

fn constant_cocycle() -> Check {
    let est = lyapunov_theta_avg(&amo(0.0, 0.0), 3.0, 1000, 8).map_err(err)?;
    let gap = (est.gamma - CONSTANT_COCYCLE_EXPONENT).abs();
    ensure(gap < 1e-3, format!("γ̂ = {:.6}, |γ̂ − ln((3+√5)/2)| = {gap:.2e}", est.gamma))
}

fn herman_bound() -> Check {
    let energies: Vec<f64> = (0..200).map(|i| -12.0 + 24.0 * i as f64 / 199.0).collect();
    let curve = lyapunov_curve(&amo(10.0, 0.0), &energies, 1000, 128).map_err(err)?;
    let (e, min) = curve.iter().map(|c| (c.energy, c.gamma)).fold((0.0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    ensure(
        min > HALF_LOG_TEN + 0.2,
        format!("min γ̂ = {min:.4} at E = {e:.3}; margin {:.4} over ½ln10 (need ≥ 0.2)", min - HALF_LOG_TEN),
    )
}

fn localization_agreement() -> Check {
    let spec = amo(4.0, 0.2);
    let report = localization_report(&spec, 1000, None, &LocalizationOptions::default()).map_err(err)?;
    let pairs = pair_with_lyapunov(&spec, &report, report.localized_count).map_err(err)?;
    let gaps: Vec<f64> = pairs.iter().map(|p| p.relative_gap).collect();
    let gap = median(&gaps).ok_or("no localized states to pair")?;
    ensure(
        report.fraction_localized >= 0.9 && gap < 0.2,
        format!(
            "localized {}/{} interior ({:.1}%), median |decay − γ̂|/γ̂ = {:.1}% over {} pairs",
            report.localized_count,
            report.interior_count,
            100.0 * report.fraction_localized,
            100.0 * gap,
            pairs.len()
        ),
    )
}

/// β fitted over `window`, evolving only up to the end of the window.
fn transport_beta(lambda: f64, half_width: usize, window: (f64, f64)) -> Result<f64, String> {
    let times = log_time_grid(window.1, 200).map_err(err)?;
    let run = evolve(&amo(lambda, 0.0), half_width, None, &times, false).map_err(err)?;
    let series = moments(&run).map_err(err)?;
    Ok(transport_exponent(&series, window).map_err(err)?.beta)
}

fn transport_transition() -> Check {
    let window = (100.0, 1000.0);
    let localized = transport_beta(4.0, 300, window)?;
    // the light cone reaches |n| = 2T; N = 2500 keeps it inside the box
    let critical = transport_beta(1.0, 2500, window)?;
    // finite-size agreement on a window both boxes resolve
    let small = transport_beta(1.0, 1000, (100.0, 400.0))?;
    let large = transport_beta(1.0, 2000, (100.0, 400.0))?;

    let times = log_time_grid(1000.0, 200).map_err(err)?;
    let free = evolve(&amo(0.0, 0.0), 2500, None, &times, false).map_err(err)?;
    let series = moments(&free).map_err(err)?;
    let ballistic = transport_exponent(&series, window).map_err(err)?.beta;
    let worst = free
        .times
        .iter()
        .zip(&free.x2_instant)
        .filter(|(t, _)| **t >= 1.0)
        .map(|(t, x2)| (x2 / (2.0 * t * t) - 1.0).abs())
        .fold(0.0, f64::max);
    ensure(
        localized < 0.15 && critical > 1.7 && (ballistic - 2.0).abs() <= 0.05 && worst < 5e-3 && (small - large).abs() < 0.05,
        format!(
            "β(λ=4) = {localized:.3}, β(λ=1) = {critical:.3} (N=1000/2000 on [100,400]: {small:.3}/{large:.3}), \
             β(λ=0) = {ballistic:.4}, max |x2/2t² − 1| = {worst:.1e}"
        ),
    )
}

fn strong_dl_plateau() -> Check {
    let spec = amo(4.0, 0.0);
    let long = strong_dl_metric(&spec, 300, 16, 1000.0, 200).map_err(err)?;
    let short = strong_dl_metric(&spec, 300, 16, 500.0, 200).map_err(err)?;
    let ratio = long.metric / short.metric;
    ensure(
        long.valid && short.valid && (ratio - 1.0).abs() <= 0.1,
        format!("sup⟨x²⟩: T=1000 → {:.4}, T=500 → {:.4}, ratio {ratio:.4}", long.metric, short.metric),
    )
}

fn duality() -> Check {
    let r = duality_check(4.0, GOLDEN_MEAN, 1000, 32).map_err(err)?;
    ensure(
        r.validated && r.scaled_distance < 0.05,
        format!(
            "validation (N={}): best scale {:.4}, distance {:.4}; N=1000 scaled distance {:.5}",
            r.validation_n, r.best_fit_scale, r.validation_distance, r.scaled_distance
        ),
    )
}

fn butterfly_sanity() -> Check {
    let g = 16;
    let f = FourierPotential::cosine();
    let rows = butterfly(2.0, &f, 10, g);
    let mut worst: f64 = 0.0;
    for row in &rows {
        let bands = row.bands.as_ref().map_err(|e| format!("{}/{} failed: {e}", row.p, row.q))?;
        let n = bands.len();
        for i in 0..n {
            worst = worst.max((bands[i].lo + bands[n - 1 - i].hi).abs());
        }
        let mirror = rows.iter().find(|r| r.p == row.q - row.p && r.q == row.q).ok_or("missing mirror row")?;
        let other = mirror.bands.as_ref().map_err(|e| e.clone())?;
        for (a, b) in bands.iter().zip(other) {
            worst = worst.max((a.lo - b.lo).abs()).max((a.hi - b.hi).abs());
        }
    }
    // ω = 1/2: E = ±(λ²cos²2πθ + 4cos²(k/2))^{1/2} over the same θ grid
    let half = rows.iter().find(|r| (r.p, r.q) == (1, 2)).ok_or("missing 1/2 row")?;
    let bands = half.bands.as_ref().map_err(|e| e.clone())?;
    let mut lo_abs = f64::INFINITY;
    let mut hi_abs: f64 = 0.0;
    for j in 0..g {
        let c = (2.0 * PI * j as f64 / (2 * g) as f64).cos();
        for k in [0.0, PI] {
            let e = (4.0 * c * c + 4.0 * (k / 2.0f64).cos().powi(2)).sqrt();
            lo_abs = lo_abs.min(e);
            hi_abs = hi_abs.max(e);
        }
    }
    let oracle = [(-hi_abs, -lo_abs), (lo_abs, hi_abs)];
    let bloch = bands.iter().zip(oracle).map(|(b, o)| (b.lo - o.0).abs().max((b.hi - o.1).abs())).fold(0.0, f64::max);
    ensure(
        worst <= 1e-8 && bloch <= 1e-8 && bands.len() == 2,
        format!("{} rows, max symmetry defect {worst:.1e}, ω=1/2 Bloch deviation {bloch:.1e}", rows.len()),
    )
}

fn kicked_rotor() -> Check {
    let spec = KickedRotorSpec::new(0.5, GOLDEN_MEAN / 2.0, 0.3).map_err(err)?;
    let run = rotor_run(spec, 4096, 1000, None).map_err(err)?;
    let saturation = run.saturation(true).ok_or("no saturation metric")?;
    let control = rotor_run(KickedRotorSpec::new(0.5, 0.0, 0.0).map_err(err)?, 4096, 1000, None).map_err(err)?;
    let monotone = control.n2[10..].windows(2).all(|w| w[1] >= w[0]);
    let growth = control.n2[1000] / control.n2[10];
    ensure(
        run.norm_drift < 1e-9
            && saturation < 1.5
            && run.flagged_at.is_none()
            && control.flagged_at.is_none()
            && monotone
            && growth > 10.0,
        format!(
            "norm drift {:.1e}, Cesàro saturation {saturation:.3} (instantaneous {:.3}); resonant control: monotone {monotone}, ⟨n²⟩(1000)/⟨n²⟩(10) = {growth:.0}",
            run.norm_drift,
            run.saturation(false).unwrap_or(f64::NAN)
        ),
    )
}

fn invariants() -> Check {
    let mut notes = Vec::new();

    let mut det: f64 = 0.0;
    let mut compose: f64 = 0.0;
    let mut subadd: f64 = f64::INFINITY;
    for (lambda, e, theta) in [(0.5, 1.0, 0.1), (2.0, 0.3, 0.7), (10.0, -4.0, 0.33), (4.0, 11.0, 0.0)] {
        let spec = amo(lambda, theta);
        for k in [1, 10, 1000, 5000] {
            let m = cocycle_product(&spec, e, k).map_err(err)?;
            det = det.max((m.determinant() - 1.0).abs());
        }
        let whole = cocycle_product(&spec, e, 700).map_err(err)?;
        let first = cocycle_product(&spec, e, 300).map_err(err)?;
        let second = cocycle_product_from(&spec, e, 300, 400).map_err(err)?;
        let joined = CocycleProduct::compose(&second, &first);
        compose = compose.max((whole.log_norm() - joined.log_norm()).abs() / whole.log_norm().max(1.0));
        subadd = subadd.min(first.log_norm() + second.log_norm() - whole.log_norm());
    }
    notes.push(format!("|det−1| {det:.1e}, compose {compose:.1e}, subadditivity slack ≥ {subadd:.1e}"));

    let mut residual: f64 = 0.0;
    for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Periodic, BoundaryCondition::Antiperiodic] {
        let h = build_finite(&amo(3.0, 0.4), 200, bc).map_err(err)?;
        let es = eigs(&h).map_err(err)?;
        for j in 0..h.dim() {
            let v = es.vector(j);
            let r = h.apply(v).iter().zip(v).map(|(a, b)| (a - es.values[j] * b).powi(2)).sum::<f64>().sqrt();
            residual = residual.max(r / h.norm_bound());
        }
    }
    notes.push(format!("eigenresidual {residual:.1e}"));

    let prop = Propagator::new(&amo(2.0, 0.3), 200).map_err(err)?;
    let psi0 = prop.origin_state();
    let e0 = prop.energy(&psi0);
    let (mut unitarity, mut reversal, mut energy): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for t in [1.0, 100.0, 1e4] {
        let psi = prop.apply(&psi0, t).map_err(err)?;
        unitarity = unitarity.max((psi.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt() - 1.0).abs());
        energy = energy.max((prop.energy(&psi) - e0).abs());
        let back = prop.apply(&psi, -t).map_err(err)?;
        reversal = reversal.max(back.iter().zip(&psi0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt());
    }
    notes.push(format!("unitarity {unitarity:.1e}, reversal {reversal:.1e}, energy {energy:.1e}"));

    let parseval = [0.5, 5.0, 20.0]
        .iter()
        .map(|&k| kick_coefficients(k, 1e-18).map(|s| (s.parseval_sum() - 1.0).abs()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?
        .into_iter()
        .fold(0.0, f64::max);
    notes.push(format!("Parseval {parseval:.1e}"));

    let text = format!(
        r#"{{"operator": {}, "axes": [{{"name": "coupling", "lo": 0.5, "hi": 6, "points": 6}},
            {{"name": "energy", "lo": -3, "hi": 3, "points": 4}}],
            "task": {{"kind": "lyapunov-curve", "k": 300, "samples": 8}}, "seed": 3}}"#,
        amo(1.0, 0.0).to_json()
    );
    let mut config = SweepConfig::from_json(&text).map_err(err)?;
    config.workers = 1;
    let serial = run_sweep(&config).map_err(err)?;
    config.workers = 4;
    let parallel = run_sweep(&config).map_err(err)?;
    let deterministic =
        serial.records.iter().zip(&parallel.records).all(|(a, b)| a.params == b.params && a.values == b.values);
    notes.push(format!("sweep determinism {deterministic}"));

    ensure(
        det < 1e-12
            && compose < 1e-9
            && subadd > -1e-9
            && residual < 1e-10
            && unitarity < 1e-10
            && reversal < 1e-9
            && energy < 1e-9
            && parseval < 1e-12
            && deterministic,
        notes.join("; "),
    )
}

type Criterion = (&'static str, Duration, fn() -> Check);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("constant-cocycle oracle", Duration::from_secs(1), constant_cocycle),
        ("Lyapunov lower bound at λ=10", Duration::from_secs(60), herman_bound),
        ("localization vs Lyapunov", Duration::from_secs(300), localization_agreement),
        ("transport transition", Duration::from_secs(600), transport_transition),
        ("strong dynamical localization plateau", Duration::from_secs(60), strong_dl_plateau),
        ("duality", Duration::from_secs(600), duality),
        ("butterfly symmetries", Duration::from_secs(60), butterfly_sanity),
        ("kicked rotor", Duration::from_secs(120), kicked_rotor),
        ("invariant suites", Duration::from_secs(300), invariants),
    ];
    let mut failed = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let within = elapsed <= *budget;
        let (pass, detail) = match outcome {
            Ok(d) => (within, d),
            Err(d) => (false, d),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} — {name}: {detail} [{:.2} s, budget {} s{}]",
            i + 1,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if within { "" } else { ", over budget" }
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
