//! Wave-packet propagation on finite sections and transport observables.
//!
//! States evolve as `Ψ_t = e^{−itH} Ψ₀ = Σ_j e^{−itE_j} ⟨φ_j, Ψ₀⟩ φ_j`, using
//! the full eigendecomposition of the section, so every output time is exact
//! up to round-off. Because `H` is real, the opposite convention `e^{+itH}`
//! gives the complex-conjugate trajectory for a real `Ψ₀`, so all position
//! moments coincide.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cocycle::theta_grid;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Geometry, OperatorSpec};
use crate::spectra::{build_finite, eigs, BoundaryCondition, Eigensystem, FiniteHamiltonian};

/// Boundary mass at or above this level marks a run invalid.
pub const BOUNDARY_MASS_LIMIT: f64 = 1e-6;

/// Fraction of the box (per side, along each direction) counted as boundary.
pub const BOUNDARY_FRACTION: f64 = 0.05;

/// Default number of log-spaced output times.
pub const DEFAULT_TIME_POINTS: usize = 200;

/// Spectral propagator of one finite section.
pub struct Propagator {
    pub hamiltonian: FiniteHamiltonian,
    pub eigen: Eigensystem,
}

impl Propagator {
    /// Dirichlet section of `spec` on `[−N, N]`.
    pub fn new(spec: &OperatorSpec, half_width: usize) -> Result<Self> {
        Self::from_hamiltonian(build_finite(spec, half_width, BoundaryCondition::Dirichlet)?)
    }

    pub fn from_hamiltonian(hamiltonian: FiniteHamiltonian) -> Result<Self> {
        let eigen = eigs(&hamiltonian)?;
        Ok(Self { hamiltonian, eigen })
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    /// Expansion coefficients `⟨φ_j, Ψ⟩` as separate real/imaginary parts.
    fn coefficients(&self, psi: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        (
            linalg::at_b(&self.eigen.vectors, &re, n, n, 1),
            linalg::at_b(&self.eigen.vectors, &im, n, n, 1),
        )
    }

    /// `e^{−itH} Ψ` for any real `t` (negative times run backwards).
    pub fn apply(&self, psi: &[Complex64], t: f64) -> Result<Vec<Complex64>> {
        Ok(self.apply_many(psi, &[t])?.pop().expect("one time"))
    }

    /// `e^{−itH} Ψ` at each of `times`.
    pub fn apply_many(&self, psi: &[Complex64], times: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let n = self.dim();
        if psi.len() != n {
            return Err(Error::domain(format!("state has length {}, section has dimension {n}", psi.len())));
        }
        let (cr, ci) = self.coefficients(psi);
        let m = times.len();
        // phased coefficients, column k for time k
        let mut pr = vec![0.0; n * m];
        let mut pi = vec![0.0; n * m];
        for (k, &t) in times.iter().enumerate() {
            for j in 0..n {
                let (s, c) = (-t * self.eigen.values[j]).sin_cos();
                pr[j + k * n] = c * cr[j] - s * ci[j];
                pi[j + k * n] = s * cr[j] + c * ci[j];
            }
        }
        let re = linalg::a_b(&self.eigen.vectors, &pr, n, n, m);
        let im = linalg::a_b(&self.eigen.vectors, &pi, n, n, m);
        Ok((0..m)
            .map(|k| (0..n).map(|i| Complex64::new(re[i + k * n], im[i + k * n])).collect())
            .collect())
    }

    /// `⟨Ψ, HΨ⟩`.
    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        let re: Vec<f64> = psi.iter().map(|z| z.re).collect();
        let im: Vec<f64> = psi.iter().map(|z| z.im).collect();
        let hr = self.hamiltonian.apply(&re);
        let hi = self.hamiltonian.apply(&im);
        re.iter().zip(&hr).map(|(a, b)| a * b).sum::<f64>() + im.iter().zip(&hi).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `δ` at the lattice origin (row 0 of a strip).
    pub fn origin_state(&self) -> Vec<Complex64> {
        let mut psi = vec![Complex64::new(0.0, 0.0); self.dim()];
        let origin = self
            .hamiltonian
            .sites
            .iter()
            .position(|s| s == &[0, 0])
            .expect("sections are centred at the origin");
        psi[origin] = Complex64::new(1.0, 0.0);
        psi
    }

    /// Squared distance from the origin along the lattice directions
    /// (strip rows are not a spatial direction).
    pub fn position_squared(&self) -> Vec<f64> {
        let boxed = self.hamiltonian.spec.geometry == Geometry::Box2d;
        self.hamiltonian
            .sites
            .iter()
            .map(|s| {
                let x = (s[0] * s[0]) as f64;
                if boxed {
                    x + (s[1] * s[1]) as f64
                } else {
                    x
                }
            })
            .collect()
    }

    /// Sites in the outer 5% of the box along any lattice direction.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let n = self.hamiltonian.half_width as f64;
        let cut = n - BOUNDARY_FRACTION * (2.0 * n + 1.0) / 2.0;
        let boxed = self.hamiltonian.spec.geometry == Geometry::Box2d;
        self.hamiltonian
            .sites
            .iter()
            .map(|s| (s[0].abs() as f64) > cut || (boxed && (s[1].abs() as f64) > cut))
            .collect()
    }
}

/// `0` followed by `points` log-spaced times on `[1, t_max]` (linear on
/// `[0, t_max]` when `t_max ≤ 1`).
pub fn log_time_grid(t_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || points < 2 {
        return Err(Error::domain("time grid needs T_max > 0 and at least two points"));
    }
    let mut t = vec![0.0];
    if t_max <= 1.0 {
        t.extend((1..=points).map(|k| t_max * k as f64 / points as f64));
    } else {
        let top = t_max.ln();
        t.extend((0..points).map(|k| (top * k as f64 / (points - 1) as f64).exp()));
        *t.last_mut().expect("non-empty") = t_max;
    }
    Ok(t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionRun {
    pub half_width: usize,
    pub times: Vec<f64>,
    /// `Σ_n |Ψ_t(n)|² n²` at each time.
    pub x2_instant: Vec<f64>,
    pub norms: Vec<f64>,
    /// `⟨Ψ_t, HΨ_t⟩` at each time.
    pub energies: Vec<f64>,
    pub boundary_mass: Vec<f64>,
    pub boundary_mass_max: f64,
    /// False when the packet reached the boundary layer.
    pub valid: bool,
    /// Full states, only when requested.
    #[serde(skip)]
    pub states: Option<Vec<Vec<Complex64>>>,
}

/// Evolves `psi0` (default `δ₀`) on the Dirichlet section of half width `N`.
pub fn evolve(
    spec: &OperatorSpec,
    half_width: usize,
    psi0: Option<&[Complex64]>,
    times: &[f64],
    keep_states: bool,
) -> Result<EvolutionRun> {
    evolve_with(&Propagator::new(spec, half_width)?, psi0, times, keep_states)
}

pub fn evolve_with(
    prop: &Propagator,
    psi0: Option<&[Complex64]>,
    times: &[f64],
    keep_states: bool,
) -> Result<EvolutionRun> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("times must be finite, non-negative and sorted"));
    }
    let origin;
    let psi0 = match psi0 {
        Some(p) => p,
        None => {
            origin = prop.origin_state();
            &origin
        }
    };
    let states = prop.apply_many(psi0, times)?;
    let x2 = prop.position_squared();
    let mask = prop.boundary_mask();
    let mut run = EvolutionRun {
        half_width: prop.hamiltonian.half_width,
        times: times.to_vec(),
        x2_instant: Vec::with_capacity(times.len()),
        norms: Vec::with_capacity(times.len()),
        energies: Vec::with_capacity(times.len()),
        boundary_mass: Vec::with_capacity(times.len()),
        boundary_mass_max: 0.0,
        valid: true,
        states: None,
    };
    for (k, psi) in states.iter().enumerate() {
        // t = 0 returns the input exactly
        let psi = if times[k] == 0.0 { psi0 } else { psi };
        let w: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        run.x2_instant.push(w.iter().zip(&x2).map(|(a, b)| a * b).sum());
        run.norms.push(w.iter().sum::<f64>().sqrt());
        run.energies.push(prop.energy(psi));
        run.boundary_mass.push(w.iter().zip(&mask).filter(|(_, &m)| m).map(|(a, _)| a).sum());
    }
    run.boundary_mass_max = run.boundary_mass.iter().copied().fold(0.0, f64::max);
    run.valid = run.boundary_mass_max < BOUNDARY_MASS_LIMIT;
    if keep_states {
        let mut states = states;
        for (k, t) in times.iter().enumerate() {
            if *t == 0.0 {
                states[k] = psi0.to_vec();
            }
        }
        run.states = Some(states);
    }
    Ok(run)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSeries {
    pub times: Vec<f64>,
    pub x2_instant: Vec<f64>,
    /// Running Cesàro mean `(1/T) ∫₀ᵀ x2_instant dt` by the trapezoid rule
    /// on the run's grid (equal to `x2_instant(0)` at `T = 0`).
    pub x2_avg: Vec<f64>,
}

/// Trapezoid running average of `values` on `times` (starting at 0).
pub fn cesaro_average(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    for k in 0..times.len() {
        if k > 0 {
            integral += 0.5 * (values[k] + values[k - 1]) * (times[k] - times[k - 1]);
        }
        let span = times[k] - times[0];
        out.push(if span > 0.0 { integral / span } else { values[k] });
    }
    out
}

/// Moment series of a valid run.
pub fn moments(run: &EvolutionRun) -> Result<MomentSeries> {
    if !run.valid {
        return Err(Error::Refused(format!(
            "run is invalid: boundary mass {:.3e} reached the limit {BOUNDARY_MASS_LIMIT:e}; increase N",
            run.boundary_mass_max
        )));
    }
    if run.times.first().is_some_and(|&t| t != 0.0) {
        return Err(Error::domain("moment series need a time grid starting at t = 0"));
    }
    Ok(MomentSeries {
        times: run.times.clone(),
        x2_instant: run.x2_instant.clone(),
        x2_avg: cesaro_average(&run.times, &run.x2_instant),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportFit {
    /// Slope of `ln x2_avg` against `ln T`.
    pub beta: f64,
    pub intercept: f64,
    pub stderr: f64,
    /// Two-sided 95% interval from Student's t with `points − 2` degrees of
    /// freedom.
    pub ci95: (f64, f64),
    pub points: usize,
    pub window: (f64, f64),
}

/// Least-squares transport exponent over `window` (inclusive).
pub fn transport_exponent(series: &MomentSeries, window: (f64, f64)) -> Result<TransportFit> {
    let pts: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(&series.x2_avg)
        .filter(|(&t, &x)| t >= window.0 && t <= window.1 && t > 0.0 && x > 0.0)
        .map(|(t, x)| (t.ln(), x.ln()))
        .collect();
    if pts.len() < 8 {
        return Err(Error::Refused(format!("only {} points in the fit window; need at least 8", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let intercept = my - beta * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - beta * p.0).powi(2)).sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, n - 2.0)
        .map_err(|e| Error::Numerical(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(TransportFit {
        beta,
        intercept,
        stderr,
        ci95: (beta - t * stderr, beta + t * stderr),
        points: pts.len(),
        window,
    })
}

/// `max over the decade [T/10, T] of x2_avg / x2_avg(T/10)`, with `T` the
/// last grid time.
pub fn plateau_ratio(series: &MomentSeries) -> Option<f64> {
    let t_end = *series.times.last()?;
    let start = series.times.iter().position(|&t| t >= t_end / 10.0)?;
    let base = series.x2_avg[start];
    if base <= 0.0 {
        return None;
    }
    let peak = series.x2_avg[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(peak / base)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongDlReport {
    /// Mean over phases of `max_t x2_instant` on the grid (a lower bound for
    /// the true supremum).
    pub metric: f64,
    pub t_max: f64,
    /// `(θ, max_t x2_instant, valid)` in phase order.
    pub per_phase: Vec<(Vec<f64>, f64, bool)>,
    /// False if any sub-run reached the boundary; the metric is then
    /// unreliable.
    pub valid: bool,
}

/// θ-averaged `sup_t ⟨x²⟩_t` over `samples` phases (first component varied).
pub fn strong_dl_metric(
    spec: &OperatorSpec,
    half_width: usize,
    samples: usize,
    t_max: f64,
    points: usize,
) -> Result<StrongDlReport> {
    strong_dl_metric_jittered(spec, half_width, samples, t_max, points, 0.0)
}

pub fn strong_dl_metric_jittered(
    spec: &OperatorSpec,
    half_width: usize,
    samples: usize,
    t_max: f64,
    points: usize,
    jitter: f64,
) -> Result<StrongDlReport> {
    if samples == 0 {
        return Err(Error::domain("strong DL metric needs at least one phase sample"));
    }
    let times = log_time_grid(t_max, points)?;
    let per_phase: Vec<(Vec<f64>, f64, bool)> = theta_grid(samples, jitter)
        .into_par_iter()
        .map(|t0| {
            let mut phase = spec.phase.clone();
            phase[0] = t0;
            let run = evolve(&spec.with_phase(phase.clone()), half_width, None, &times, false)?;
            let sup = run.x2_instant.iter().copied().fold(0.0, f64::max);
            Ok((phase, sup, run.valid))
        })
        .collect::<Result<_>>()?;
    let metric = per_phase.iter().map(|p| p.1).sum::<f64>() / samples as f64;
    let valid = per_phase.iter().all(|p| p.2);
    Ok(StrongDlReport { metric, t_max, per_phase, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GOLDEN_MEAN;

    #[test]
    fn time_zero_returns_input() {
        let spec = OperatorSpec::almost_mathieu(1.0, GOLDEN_MEAN, 0.1).unwrap();
        let run = evolve(&spec, 20, None, &[0.0, 1.0], true).unwrap();
        let s = run.states.unwrap();
        assert_eq!(s[0][20], Complex64::new(1.0, 0.0));
        assert!(s[0].iter().enumerate().all(|(i, z)| i == 20 || *z == Complex64::new(0.0, 0.0)));
        assert_eq!(run.x2_instant[0], 0.0);
    }

    #[test]
    fn grid_shape() {
        let t = log_time_grid(1000.0, 200).unwrap();
        assert_eq!(t.len(), 201);
        assert_eq!(t[0], 0.0);
        assert_eq!(t[1], 1.0);
        assert_eq!(t[200], 1000.0);
        assert!(log_time_grid(-1.0, 10).is_err());
    }

    #[test]
    fn cesaro_of_linear_is_half() {
        let t: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let avg = cesaro_average(&t, &t);
        for (k, a) in avg.iter().enumerate().skip(1) {
            assert!((a - k as f64 / 2.0).abs() < 1e-14);
        }
    }

    #[test]
    fn fit_refuses_short_windows() {
        let s = MomentSeries { times: vec![0.0, 1.0, 2.0], x2_instant: vec![0.0, 1.0, 4.0], x2_avg: vec![0.0, 1.0, 2.0] };
        assert!(matches!(transport_exponent(&s, (1.0, 2.0)), Err(Error::Refused(_))));
    }

    #[test]
    fn invalid_runs_are_refused() {
        let spec = OperatorSpec::almost_mathieu(0.0, GOLDEN_MEAN, 0.0).unwrap();
        let run = evolve(&spec, 20, None, &[0.0, 50.0], false).unwrap();
        assert!(!run.valid);
        assert!(matches!(moments(&run), Err(Error::Refused(_))));
    }
}
