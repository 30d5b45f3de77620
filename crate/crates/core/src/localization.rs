//! Eigenfunction diagnostics: exponential decay fits, inverse participation
//! ratios, localization centres and comparison against Lyapunov exponents.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cocycle::lyapunov_theta_avg;
use crate::error::{Error, Result};
use crate::model::{Geometry, OperatorSpec};
use crate::spectra::{build_finite, eigs, BoundaryCondition, FiniteHamiltonian};

/// Amplitudes at or below this value are excluded from decay fits.
pub const AMPLITUDE_FLOOR: f64 = 1e-13;

/// Options for a single profile fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Sites this close to either end of the box are excluded.
    pub edge_margin: usize,
    pub floor: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { edge_margin: 5, floor: AMPLITUDE_FLOOR }
    }
}

impl ProfileOptions {
    /// Margin `max(5, N/100)` used for sections of half width `N`.
    pub fn for_half_width(n: usize) -> Self {
        Self { edge_margin: 5.max(n / 100), ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenfunctionProfile {
    pub energy: f64,
    /// Index (along the long direction) of the largest amplitude.
    pub center: usize,
    /// Fitted decay rate per site, natural-log units, `≥ 0`.
    pub decay_rate: f64,
    /// Coefficient of determination of the two-sided log-linear fit.
    pub fit_r2: f64,
    /// `Σ|ψ|⁴`.
    pub ipr: f64,
    /// Fitted slopes of `ln|ψ|` on each side (`None` when too few points).
    pub left_rate: Option<f64>,
    pub right_rate: Option<f64>,
    /// Set when neither side had enough amplitudes above the floor.
    pub below_floor: bool,
}

struct SideFit {
    rate: f64,
    ss_res: f64,
    ss_tot: f64,
}

fn fit_side(points: &[(f64, f64)]) -> Option<SideFit> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Some(SideFit { rate: -slope, ss_res, ss_tot })
}

/// Profile of a normalized vector on a line (index = lattice position).
pub fn profile(psi: &[f64], energy: f64) -> Result<EigenfunctionProfile> {
    profile_with(psi, energy, &ProfileOptions::default())
}

pub fn profile_with(psi: &[f64], energy: f64, opts: &ProfileOptions) -> Result<EigenfunctionProfile> {
    check_normalized(psi)?;
    let amps: Vec<f64> = psi.iter().map(|x| x.abs()).collect();
    let ipr = psi.iter().map(|x| x.powi(4)).sum();
    Ok(fit_amplitudes(&amps, energy, ipr, opts))
}

fn check_normalized(psi: &[f64]) -> Result<()> {
    if psi.is_empty() {
        return Err(Error::domain("empty state"));
    }
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::domain(format!("state is not normalized (‖ψ‖ = {norm})")));
    }
    Ok(())
}

/// Two-sided log-linear fit of `ln a(i)` against `|i − centre|`; the decay
/// rate averages the two side slopes.
fn fit_amplitudes(amps: &[f64], energy: f64, ipr: f64, opts: &ProfileOptions) -> EigenfunctionProfile {
    let len = amps.len();
    let center = amps
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let lo = opts.edge_margin.min(len);
    let hi = len.saturating_sub(opts.edge_margin);
    let point = |i: usize| (amps[i] > opts.floor).then(|| (i.abs_diff(center) as f64, amps[i].ln()));
    let left: Vec<_> = (lo..hi.min(center + 1)).filter_map(point).collect();
    let right: Vec<_> = (lo.max(center)..hi).filter_map(point).collect();
    let fits: Vec<SideFit> = [fit_side(&left), fit_side(&right)].into_iter().flatten().collect();
    let (left_rate, right_rate) = (fit_side(&left).map(|f| f.rate), fit_side(&right).map(|f| f.rate));
    if fits.is_empty() {
        return EigenfunctionProfile {
            energy,
            center,
            decay_rate: 0.0,
            fit_r2: 0.0,
            ipr,
            left_rate,
            right_rate,
            below_floor: true,
        };
    }
    let rate = fits.iter().map(|f| f.rate).sum::<f64>() / fits.len() as f64;
    let ss_res: f64 = fits.iter().map(|f| f.ss_res).sum();
    let ss_tot: f64 = fits.iter().map(|f| f.ss_tot).sum();
    let fit_r2 = if ss_tot > 0.0 { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) } else { 0.0 };
    EigenfunctionProfile {
        energy,
        center,
        decay_rate: rate.max(0.0),
        fit_r2,
        ipr,
        left_rate,
        right_rate,
        below_floor: false,
    }
}

/// Amplitude per long-direction slice: `|ψ(n)|` on a line,
/// `(Σ_s |ψ(n,s)|²)^{1/2}` on a strip.
fn slice_amplitudes(h: &FiniteHamiltonian, psi: &[f64]) -> Vec<f64> {
    let slice = h.dim() / h.long_len();
    psi.chunks(slice).map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
}

/// Classification thresholds for [`localization_report`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationOptions {
    pub decay_threshold: f64,
    pub min_r2: f64,
    /// Minimum distance (sites) from the centre to the box edge.
    pub edge_distance: usize,
}

impl Default for LocalizationOptions {
    fn default() -> Self {
        Self { decay_threshold: 0.05, min_r2: 0.8, edge_distance: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    /// Position of the eigenvalue in ascending order.
    pub index: usize,
    /// Lattice coordinate of the centre along the long direction.
    pub center_site: i64,
    pub interior: bool,
    pub localized: bool,
    pub profile: EigenfunctionProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationReport {
    pub half_width: usize,
    pub window: (f64, f64),
    pub options: LocalizationOptions,
    /// States in the window whose centre is far enough from the edge.
    pub interior_count: usize,
    pub localized_count: usize,
    /// `localized / interior`; 0 for an empty window.
    pub fraction_localized: f64,
    /// Mean decay rate over localized states (0 if none).
    pub mean_decay: f64,
    /// Mean IPR over all states in the window.
    pub mean_ipr: f64,
    pub states: Vec<StateRecord>,
}

/// Profiles every eigenstate with energy in `window` (all states for
/// `None`) and classifies localization.
pub fn localization_report(
    spec: &OperatorSpec,
    half_width: usize,
    window: Option<(f64, f64)>,
    options: &LocalizationOptions,
) -> Result<LocalizationReport> {
    if spec.geometry == Geometry::Box2d {
        return Err(Error::Unsupported("decay fits on planar boxes".into()));
    }
    let h = build_finite(spec, half_width, BoundaryCondition::Dirichlet)?;
    let es = eigs(&h)?;
    let window = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let popts = ProfileOptions::for_half_width(half_width);
    let len = h.long_len();
    let selected: Vec<usize> = (0..h.dim()).filter(|&j| es.values[j] >= window.0 && es.values[j] <= window.1).collect();
    let states: Vec<StateRecord> = selected
        .par_iter()
        .map(|&j| {
            let psi = es.vector(j);
            let ipr = psi.iter().map(|x| x.powi(4)).sum();
            let profile = fit_amplitudes(&slice_amplitudes(&h, psi), es.values[j], ipr, &popts);
            let interior = profile.center >= options.edge_distance && profile.center + options.edge_distance < len;
            let localized = interior
                && profile.decay_rate > options.decay_threshold
                && profile.fit_r2 > options.min_r2;
            StateRecord { index: j, center_site: profile.center as i64 - half_width as i64, interior, localized, profile }
        })
        .collect();
    Ok(summarize(half_width, window, *options, states))
}

fn summarize(half_width: usize, window: (f64, f64), options: LocalizationOptions, states: Vec<StateRecord>) -> LocalizationReport {
    let interior_count = states.iter().filter(|s| s.interior).count();
    let localized: Vec<&StateRecord> = states.iter().filter(|s| s.localized).collect();
    let fraction_localized = if interior_count == 0 { 0.0 } else { localized.len() as f64 / interior_count as f64 };
    let mean_decay = if localized.is_empty() {
        0.0
    } else {
        localized.iter().map(|s| s.profile.decay_rate).sum::<f64>() / localized.len() as f64
    };
    let mean_ipr = if states.is_empty() {
        0.0
    } else {
        states.iter().map(|s| s.profile.ipr).sum::<f64>() / states.len() as f64
    };
    LocalizationReport {
        half_width,
        window,
        options,
        interior_count,
        localized_count: localized.len(),
        fraction_localized,
        mean_decay,
        mean_ipr,
        states,
    }
}

impl LocalizationReport {
    /// Reclassifies the stored profiles with different thresholds.
    pub fn reclassify(&self, options: &LocalizationOptions) -> LocalizationReport {
        let len = 2 * self.half_width + 1;
        let states = self
            .states
            .iter()
            .map(|s| {
                let interior = s.profile.center >= options.edge_distance && s.profile.center + options.edge_distance < len;
                let localized = interior
                    && s.profile.decay_rate > options.decay_threshold
                    && s.profile.fit_r2 > options.min_r2;
                StateRecord { interior, localized, ..s.clone() }
            })
            .collect();
        summarize(self.half_width, self.window, *options, states)
    }
}

/// Cocycle settings used to attach `γ̂` to eigenstates.
pub const PAIRING_STEPS: usize = 2000;
pub const PAIRING_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayPair {
    pub energy: f64,
    pub center_site: i64,
    pub decay_rate: f64,
    pub gamma_hat: f64,
    /// `|decay − γ̂| / γ̂`.
    pub relative_gap: f64,
}

/// Pairs up to `sample_count` localized states (evenly spread through the
/// spectrum) with the θ-averaged Lyapunov exponent at their energy.
pub fn decay_vs_lyapunov(spec: &OperatorSpec, half_width: usize, sample_count: usize) -> Result<Vec<DecayPair>> {
    if spec.geometry != Geometry::Line {
        return Err(Error::Unsupported("decay/Lyapunov pairing needs a line geometry".into()));
    }
    let report = localization_report(spec, half_width, None, &LocalizationOptions::default())?;
    pair_with_lyapunov(spec, &report, sample_count)
}

/// As [`decay_vs_lyapunov`] on an existing report.
pub fn pair_with_lyapunov(spec: &OperatorSpec, report: &LocalizationReport, sample_count: usize) -> Result<Vec<DecayPair>> {
    let localized: Vec<&StateRecord> = report.states.iter().filter(|s| s.localized).collect();
    if localized.is_empty() || sample_count == 0 {
        return Ok(vec![]);
    }
    let take = sample_count.min(localized.len());
    let picks: Vec<&StateRecord> = (0..take).map(|i| localized[i * localized.len() / take]).collect();
    picks
        .par_iter()
        .map(|s| {
            let g = lyapunov_theta_avg(spec, s.profile.energy, PAIRING_STEPS, PAIRING_SAMPLES)?.gamma;
            Ok(DecayPair {
                energy: s.profile.energy,
                center_site: s.center_site,
                decay_rate: s.profile.decay_rate,
                gamma_hat: g,
                relative_gap: (s.profile.decay_rate - g).abs() / g,
            })
        })
        .collect()
}

/// Median of a list (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecayRow {
    pub theta: Vec<f64>,
    pub fraction_localized: f64,
    /// Median decay rate of the localized states at this phase.
    pub median_decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecayReport {
    pub rows: Vec<PhaseDecayRow>,
    /// `(max − min)/mean` of the per-phase median decay rates.
    pub spread: f64,
    /// Set when the spread exceeds 25%; per-phase rates should then not be
    /// averaged.
    pub flagged: bool,
}

/// Per-phase decay summary; never averages across phases silently.
pub fn decay_by_phase(spec: &OperatorSpec, half_width: usize, phases: &[Vec<f64>]) -> Result<PhaseDecayReport> {
    let rows: Vec<PhaseDecayRow> = phases
        .iter()
        .map(|theta| {
            let r = localization_report(&spec.with_phase(theta.clone()), half_width, None, &LocalizationOptions::default())?;
            let rates: Vec<f64> = r.states.iter().filter(|s| s.localized).map(|s| s.profile.decay_rate).collect();
            Ok(PhaseDecayRow {
                theta: theta.clone(),
                fraction_localized: r.fraction_localized,
                median_decay: median(&rates).unwrap_or(0.0),
            })
        })
        .collect::<Result<_>>()?;
    let meds: Vec<f64> = rows.iter().map(|r| r.median_decay).collect();
    let mean = meds.iter().sum::<f64>() / meds.len().max(1) as f64;
    let (lo, hi) = meds.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let spread = if mean > 0.0 { (hi - lo) / mean } else { 0.0 };
    Ok(PhaseDecayReport { rows, spread, flagged: spread > 0.25 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delta_state() {
        let mut psi = vec![0.0; 21];
        psi[0] = 1.0;
        let p = profile(&psi, 0.0).unwrap();
        assert_eq!(p.ipr, 1.0);
        assert_eq!(p.center, 0);
    }

    #[test]
    fn uniform_state() {
        let n = 41;
        let psi = vec![1.0 / (n as f64).sqrt(); n];
        let p = profile(&psi, 0.0).unwrap();
        assert!((p.ipr - 1.0 / n as f64).abs() < 1e-15);
        assert!(p.decay_rate < 1e-12);
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let n = 201;
        let mut psi: Vec<f64> = (0..n).map(|i| (-0.3 * (i as f64 - 100.0).abs()).exp()).collect();
        let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
        psi.iter_mut().for_each(|x| *x /= norm);
        let p = profile(&psi, 0.0).unwrap();
        assert_eq!(p.center, 100);
        assert!((p.decay_rate - 0.3).abs() < 1e-12);
        assert!((p.fit_r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unnormalized_is_rejected() {
        assert!(profile(&[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn median_of_lists() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }
}
