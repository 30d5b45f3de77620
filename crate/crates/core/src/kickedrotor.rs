//! Quantum kicked rotor in the momentum representation.
//!
//! One period applies the free-evolution phases `exp(−i(a n² + b n))` and
//! then the kick `e^{−iκ cos 2πθ}`, whose momentum-space matrix is the
//! Toeplitz operator `S(n − m)` with `S(n) = (−i)ⁿ Jₙ(κ)`.
//!
//! The quadratic phase is a skew-shift orbit: with
//! `ω = −a/π`, `x₁ = −(a + b)/2π`, `x₂ = 0` (all mod 1), the skew shift
//! `T(x₁, x₂) = (x₁ + ω, x₂ + x₁)` satisfies
//! `exp(2πi (Tⁿx)₂) = exp(−i(a n² + b n))`; see [`skew_shift_data`].

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dynamics::cesaro_average;
use crate::error::{Error, Result};
use crate::model::frac;

/// A state is flagged once its boundary mass reaches this level.
pub const ROTOR_BOUNDARY_LIMIT: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickedRotorSpec {
    /// Kick strength `κ ≥ 0`.
    pub kappa: f64,
    /// Coefficient of the quadratic free phase.
    pub a: f64,
    /// Coefficient of the linear free phase.
    pub b: f64,
}

impl KickedRotorSpec {
    pub fn new(kappa: f64, a: f64, b: f64) -> Result<Self> {
        let s = Self { kappa, a, b };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::spec(format!("kick strength must be finite and ≥ 0, got {}", self.kappa)));
        }
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(Error::spec("free-evolution coefficients must be finite"));
        }
        Ok(())
    }

    /// Smallest half width recommended for a `periods`-step run:
    /// `4κ√T + 64`.
    pub fn horizon(&self, periods: usize) -> usize {
        (4.0 * self.kappa * (periods as f64).sqrt()).ceil() as usize + 64
    }
}

/// Skew-shift data `(ω, x₁, x₂)` reproducing the free phases of `(a, b)`.
pub fn skew_shift_data(a: f64, b: f64) -> (f64, f64, f64) {
    (frac(-a / PI), frac(-(a + b) / (2.0 * PI)), 0.0)
}

/// Kick coefficients `S(n)` for `n ∈ [−m, m]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KickCoefficients {
    pub half_support: usize,
    /// `values[n + half_support] = S(n)`.
    pub values: Vec<Complex64>,
}

impl KickCoefficients {
    pub fn get(&self, n: i64) -> Complex64 {
        let m = self.half_support as i64;
        if n.abs() > m {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(n + m) as usize]
        }
    }

    /// `Σ |S(n)|²`, which is 1 for a unit-modulus symbol.
    pub fn parseval_sum(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Quadrature size used for `κ`: a power of two well beyond the support.
fn quadrature_size(kappa: f64) -> usize {
    (8 * (kappa.ceil() as usize + 32)).next_power_of_two()
}

/// Fourier coefficients of `e^{−iκ cos 2πθ}` by `G`-point quadrature.
pub fn kick_spectrum(kappa: f64, grid: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = (0..grid)
        .map(|j| Complex64::from_polar(1.0, -kappa * (2.0 * PI * j as f64 / grid as f64).cos()))
        .collect();
    FftPlanner::new().plan_fft_forward(grid).process(&mut buf);
    let scale = 1.0 / grid as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

/// Kick coefficients truncated where `|S(n)| < ε`.
pub fn kick_coefficients(kappa: f64, eps: f64) -> Result<KickCoefficients> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::domain("kick strength must be finite and ≥ 0"));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::domain("cutoff must be positive"));
    }
    let g = quadrature_size(kappa);
    let spec = kick_spectrum(kappa, g);
    let at = |n: i64| spec[n.rem_euclid(g as i64) as usize];
    let limit = (g / 2 - 1) as i64;
    let m = (0..=limit).rev().find(|&n| at(n).norm() >= eps || at(-n).norm() >= eps).unwrap_or(0);
    Ok(KickCoefficients { half_support: m as usize, values: (-m..=m).map(at).collect() })
}

/// Momentum amplitudes on `[−N, N]` after `t` periods.
#[derive(Clone, Debug, PartialEq)]
pub struct RotorState {
    pub half_width: usize,
    /// `amps[n + N]` is the amplitude at momentum `n`.
    pub amps: Vec<Complex64>,
    pub t: usize,
    /// Set once the boundary mass reached [`ROTOR_BOUNDARY_LIMIT`].
    pub flagged: bool,
}

impl RotorState {
    /// `δ_m`.
    pub fn delta(half_width: usize, m: i64) -> Result<Self> {
        if m.unsigned_abs() as usize > half_width {
            return Err(Error::domain("initial momentum outside the lattice"));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * half_width + 1];
        amps[(m + half_width as i64) as usize] = Complex64::new(1.0, 0.0);
        Ok(Self { half_width, amps, t: 0, flagged: false })
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `Σ n² |φ(n)|²`.
    pub fn second_moment(&self) -> f64 {
        let n0 = self.half_width as f64;
        self.amps.iter().enumerate().map(|(i, z)| (i as f64 - n0).powi(2) * z.norm_sqr()).sum()
    }

    /// Probability in the outer 5% of momenta on each side.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.half_width as f64;
        let cut = n - 0.05 * (2.0 * n + 1.0) / 2.0;
        self.amps
            .iter()
            .enumerate()
            .filter(|(i, _)| (*i as f64 - n).abs() > cut)
            .map(|(_, z)| z.norm_sqr())
            .sum()
    }
}

/// Precomputed one-period map for a fixed spec and lattice size.
pub struct FloquetOperator {
    pub spec: KickedRotorSpec,
    pub half_width: usize,
    free: Vec<Complex64>,
    kick: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    grid: usize,
}

impl FloquetOperator {
    pub fn new(spec: KickedRotorSpec, half_width: usize) -> Result<Self> {
        spec.validate()?;
        let len = 2 * half_width + 1;
        let grid = (4 * len).next_power_of_two();
        let n0 = half_width as i64;
        let free = (0..len as i64)
            .map(|i| {
                let n = (i - n0) as f64;
                Complex64::from_polar(1.0, -(spec.a * n * n + spec.b * n))
            })
            .collect();
        let kick = (0..grid)
            .map(|j| Complex64::from_polar(1.0, -spec.kappa * (2.0 * PI * j as f64 / grid as f64).cos()))
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            spec,
            half_width,
            free,
            kick,
            forward: planner.plan_fft_forward(grid),
            inverse: planner.plan_fft_inverse(grid),
            grid,
        })
    }

    /// Angle-grid size used for the kick.
    pub fn grid_size(&self) -> usize {
        self.grid
    }

    /// Applies the free-evolution phases.
    pub fn apply_free(&self, amps: &mut [Complex64]) {
        amps.iter_mut().zip(&self.free).for_each(|(z, p)| *z *= p);
    }

    /// Applies the kick by transforming to the angle grid and back; the
    /// result is truncated to `[−N, N]`.
    pub fn apply_kick(&self, amps: &mut [Complex64]) {
        let g = self.grid as i64;
        let n0 = self.half_width as i64;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid];
        for (i, z) in amps.iter().enumerate() {
            buf[(i as i64 - n0).rem_euclid(g) as usize] = *z;
        }
        // φ(θ_j) = Σ_n c_n e^{2πinj/G}
        self.inverse.process(&mut buf);
        buf.iter_mut().zip(&self.kick).for_each(|(z, k)| *z *= k);
        self.forward.process(&mut buf);
        let scale = 1.0 / self.grid as f64;
        for (i, z) in amps.iter_mut().enumerate() {
            *z = buf[(i as i64 - n0).rem_euclid(g) as usize] * scale;
        }
    }
}

/// One period: free phases, then the kick.
pub fn floquet_step(state: &mut RotorState, op: &FloquetOperator) -> Result<()> {
    if state.half_width != op.half_width {
        return Err(Error::domain("state and Floquet operator have different lattice sizes"));
    }
    op.apply_free(&mut state.amps);
    op.apply_kick(&mut state.amps);
    state.t += 1;
    if state.boundary_mass() >= ROTOR_BOUNDARY_LIMIT {
        state.flagged = true;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorRun {
    pub spec: KickedRotorSpec,
    pub half_width: usize,
    /// Periods `0, 1, …, T`.
    pub times: Vec<f64>,
    /// `⟨n²⟩_t`.
    pub n2: Vec<f64>,
    /// Running Cesàro mean of `⟨n²⟩`.
    pub n2_avg: Vec<f64>,
    /// `max_t |‖φ_t‖ − 1|`.
    pub norm_drift: f64,
    pub boundary_mass_max: f64,
    /// First period at which the state was flagged; later entries are
    /// unreliable.
    pub flagged_at: Option<usize>,
}

impl RotorRun {
    /// Number of leading entries not affected by a boundary breach.
    pub fn valid_len(&self) -> usize {
        self.flagged_at.unwrap_or(self.n2.len())
    }

    /// `max over the last decade of ⟨n²⟩ / ⟨n²⟩ at the decade start`
    /// (Cesàro-averaged when `averaged`).
    pub fn saturation(&self, averaged: bool) -> Option<f64> {
        let series = if averaged { &self.n2_avg } else { &self.n2 };
        decade_ratio(&self.times[..self.valid_len()], &series[..self.valid_len()])
    }

    /// Cesàro saturation metric evaluated at every period `t`, over the
    /// window `[⌈t/10⌉, t]` (`None` while the window start is zero).
    pub fn running_saturation(&self) -> Vec<Option<f64>> {
        // both window ends only move forward: monotone deque of maxima
        let v = &self.n2_avg;
        let mut deque: std::collections::VecDeque<usize> = Default::default();
        let mut out = Vec::with_capacity(v.len());
        for t in 0..v.len() {
            while deque.back().is_some_and(|&j| v[j] <= v[t]) {
                deque.pop_back();
            }
            deque.push_back(t);
            let start = t.div_ceil(10);
            while deque.front().is_some_and(|&j| j < start) {
                deque.pop_front();
            }
            let base = v[start];
            out.push((base > 0.0).then(|| v[deque[0]] / base));
        }
        out
    }
}

fn decade_ratio(times: &[f64], values: &[f64]) -> Option<f64> {
    let t_end = *times.last()?;
    let start = times.iter().position(|&t| t >= t_end / 10.0)?;
    let base = values[start];
    if base <= 0.0 {
        return None;
    }
    Some(values[start..].iter().copied().fold(f64::NEG_INFINITY, f64::max) / base)
}

/// Runs `periods` steps from `initial` (default `δ₀`).
pub fn rotor_run(spec: KickedRotorSpec, half_width: usize, periods: usize, initial: Option<RotorState>) -> Result<RotorRun> {
    let op = FloquetOperator::new(spec, half_width)?;
    let mut state = match initial {
        Some(s) if s.half_width == half_width => s,
        Some(_) => return Err(Error::domain("initial state has the wrong lattice size")),
        None => RotorState::delta(half_width, 0)?,
    };
    let norm0 = state.norm();
    let mut n2 = vec![state.second_moment()];
    let mut drift: f64 = 0.0;
    let mut bm = state.boundary_mass();
    let mut flagged_at = None;
    for t in 1..=periods {
        floquet_step(&mut state, &op)?;
        n2.push(state.second_moment());
        drift = drift.max((state.norm() - norm0).abs());
        bm = bm.max(state.boundary_mass());
        if state.flagged && flagged_at.is_none() {
            flagged_at = Some(t);
        }
    }
    let times: Vec<f64> = (0..=periods).map(|t| t as f64).collect();
    let n2_avg = cesaro_average(&times, &n2);
    Ok(RotorRun { spec, half_width, times, n2, n2_avg, norm_drift: drift, boundary_mass_max: bm, flagged_at })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_kick_is_identity() {
        let s = kick_coefficients(0.0, 1e-14).unwrap();
        assert_eq!(s.half_support, 0);
        assert!((s.values[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn free_step_keeps_delta() {
        let spec = KickedRotorSpec::new(0.0, 0.7, 0.3).unwrap();
        let op = FloquetOperator::new(spec, 10).unwrap();
        let mut st = RotorState::delta(10, 3).unwrap();
        floquet_step(&mut st, &op).unwrap();
        for (i, z) in st.amps.iter().enumerate() {
            let expect = if i == 13 { 1.0 } else { 0.0 };
            assert!((z.norm() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_kick_is_rejected() {
        assert!(KickedRotorSpec::new(-1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn running_saturation_matches_direct_windows() {
        let spec = KickedRotorSpec::new(0.5, 0.3, 0.1).unwrap();
        let run = rotor_run(spec, 64, 120, None).unwrap();
        let running = run.running_saturation();
        for t in [10usize, 57, 120] {
            let start = t.div_ceil(10);
            let peak = run.n2_avg[start..=t].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(running[t], Some(peak / run.n2_avg[start]));
        }
        assert_eq!(running[0], None);
    }

    #[test]
    fn horizon_rule() {
        let s = KickedRotorSpec::new(0.5, 0.0, 0.0).unwrap();
        assert_eq!(s.horizon(100), 84);
    }
}
