//! Transfer-matrix cocycles and Lyapunov exponents.
//!
//! The eigenvalue equation `ψ(n+1) + ψ(n−1) + V_n ψ(n) = E ψ(n)` propagates
//! as `(ψ(n+1), ψ(n))ᵀ = A_n (ψ(n), ψ(n−1))ᵀ` with
//! `A_n = [[E − V_n, −1], [1, 0]]`, and `M_k = A_{k−1} ⋯ A_0`.
//!
//! Long products are kept in Iwasawa form `M = R(φ) · e^ρ [[1, t], [0, e^{−2ρ}]]`:
//! a rotation, a log scale and a shear. The representation has determinant
//! exactly one by construction, never overflows, and the norm is recovered as
//! `ln‖M‖_F = ρ + ½ ln(1 + t² + e^{−4ρ})`.
//!
//! All norms are Frobenius norms. They differ from operator norms by at most
//! a factor `√2`, which shifts `(1/k) ln‖M_k‖` by at most `ln√2 / k`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{OperatorSpec, GOLDEN_MEAN};

/// A real 2×2 matrix, row-major.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix(pub [[f64; 2]; 2]);

impl TransferMatrix {
    pub const IDENTITY: TransferMatrix = TransferMatrix([[1.0, 0.0], [0.0, 1.0]]);

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn mul(&self, rhs: &TransferMatrix) -> TransferMatrix {
        let (a, b) = (&self.0, &rhs.0);
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        TransferMatrix(out)
    }

    pub fn scale(&self, s: f64) -> TransferMatrix {
        TransferMatrix(self.0.map(|r| r.map(|x| x * s)))
    }
}

/// One-step matrix `[[E − v, −1], [1, 0]]`.
#[inline]
pub fn transfer_step(energy: f64, v: f64) -> TransferMatrix {
    TransferMatrix([[energy - v, -1.0], [1.0, 0.0]])
}

/// Overflow-free running product `M_k` of unimodular transfer matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CocycleProduct {
    /// Rotation `(cos φ, sin φ)`.
    rot: (f64, f64),
    /// `ρ = ln r₁₁`.
    rho: f64,
    /// `t = r₁₂ / r₁₁`.
    shear: f64,
    steps: usize,
}

impl CocycleProduct {
    pub fn identity() -> Self {
        Self { rot: (1.0, 0.0), rho: 0.0, shear: 0.0, steps: 0 }
    }

    /// Iwasawa decomposition of a single matrix with determinant one.
    pub fn from_matrix(m: &TransferMatrix) -> Self {
        let [[a, b], [c, d]] = m.0;
        let r11 = a.hypot(c);
        let (cs, sn) = (a / r11, c / r11);
        let r12 = cs * b + sn * d;
        Self { rot: (cs, sn), rho: r11.ln(), shear: r12 / r11, steps: 1 }
    }

    /// `later · earlier`.
    pub fn compose(later: &CocycleProduct, earlier: &CocycleProduct) -> CocycleProduct {
        // later · earlier = Q₁ e^{ρ₁} N R₂ with N = [[1, t₁], [0, e^{−2ρ₁}]]·Q₂
        let (c2, s2) = earlier.rot;
        let lower = (-2.0 * later.rho).exp();
        let n = [[c2 + later.shear * s2, -s2 + later.shear * c2], [lower * s2, lower * c2]];
        let n11 = n[0][0].hypot(n[1][0]);
        let (c3, s3) = (n[0][0] / n11, n[1][0] / n11);
        let n12 = c3 * n[0][1] + s3 * n[1][1];
        let u = n12 / n11;
        let sigma = later.rho + n11.ln();
        let (c1, s1) = later.rot;
        let rot = (c1 * c3 - s1 * s3, s1 * c3 + c1 * s3);
        let norm = rot.0.hypot(rot.1);
        CocycleProduct {
            rot: (rot.0 / norm, rot.1 / norm),
            rho: sigma + earlier.rho,
            shear: earlier.shear + u * (-2.0 * earlier.rho).exp(),
            steps: later.steps + earlier.steps,
        }
    }

    /// Left-multiplies by one more factor.
    pub fn push(&mut self, factor: &TransferMatrix) {
        *self = Self::compose(&Self::from_matrix(factor), self);
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `ln‖M‖_F`.
    pub fn log_norm(&self) -> f64 {
        // log-sum-exp of {0, 2 ln|t|, −4ρ}
        let terms = [0.0, 2.0 * self.shear.abs().ln(), -4.0 * self.rho];
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        self.rho + 0.5 * (m + terms.iter().map(|x| (x - m).exp()).sum::<f64>().ln())
    }

    /// Log of the factored-out scale; zero for the empty product.
    pub fn log_norm_accumulator(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.log_norm()
        }
    }

    /// `M / e^{accumulator}`: unit Frobenius norm once `k ≥ 1`, the identity
    /// for `k = 0`. Entries below `e^{−2·accumulator}` are not representable,
    /// so strongly hyperbolic products lose their determinant in this view.
    pub fn normalized(&self) -> TransferMatrix {
        self.scaled_upper(self.rho - self.log_norm_accumulator())
    }

    /// `Q · e^{s} [[1, t], [0, e^{−2ρ}]]` evaluated in floating point.
    fn scaled_upper(&self, log_scale: f64) -> TransferMatrix {
        let (c, s) = self.rot;
        let k = log_scale.exp();
        let r11 = k;
        let r12 = k * self.shear;
        let r22 = (log_scale - 2.0 * self.rho).exp();
        TransferMatrix([[c * r11, c * r12 - s * r22], [s * r11, s * r12 + c * r22]])
    }

    /// The unscaled product; overflows for long hyperbolic products.
    pub fn to_matrix(&self) -> TransferMatrix {
        self.scaled_upper(self.rho)
    }

    /// Determinant of the represented product: `det R(φ) = cos²φ + sin²φ`
    /// times `r₁₁ r₂₂`, which is one by construction.
    pub fn determinant(&self) -> f64 {
        let (c, s) = self.rot;
        c * c + s * s
    }

    /// Trace of the product divided by `e^{log_scale}`.
    pub fn scaled_trace(&self, log_scale: f64) -> f64 {
        self.scaled_upper(self.rho - log_scale).trace()
    }
}

/// `M_k(θ, E)` for a line operator, starting at site 0.
pub fn cocycle_product(spec: &OperatorSpec, energy: f64, steps: usize) -> Result<CocycleProduct> {
    cocycle_product_from(spec, energy, 0, steps)
}

/// `A_{start+k−1} ⋯ A_start`, i.e. `M_k(T^{start} θ, E)` for shift orbits.
pub fn cocycle_product_from(spec: &OperatorSpec, energy: f64, start: i64, steps: usize) -> Result<CocycleProduct> {
    if spec.diagonal_limit {
        return Err(Error::Unsupported("transfer matrices of the diagonal limit".into()));
    }
    let v = spec.line_potential()?;
    v.check_range(&(start..start + steps as i64))?;
    let mut acc = CocycleProduct::identity();
    for n in start..start + steps as i64 {
        acc.push(&transfer_step(energy, v.value(n)?));
    }
    Ok(acc)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub energy: f64,
    /// Estimated exponent, natural-log units per site.
    pub gamma: f64,
    pub k: usize,
    pub theta_samples: usize,
    /// Standard error over the θ grid, or the `k` vs `k/2` difference for
    /// single-orbit estimates.
    pub stderr: f64,
}

/// θ-grid used by [`lyapunov_theta_avg`]: `θ_j = (j + ½)/M + offset`.
pub fn theta_grid(samples: usize, jitter: f64) -> Vec<f64> {
    let offset = GOLDEN_MEAN * 1e-3 + jitter;
    (0..samples).map(|j| crate::model::frac((j as f64 + 0.5) / samples as f64 + offset)).collect()
}

/// Per-phase values `(1/k) ln‖M_k(θ_j, E)‖` on a grid of first phase
/// coordinates (other coordinates are taken from `spec`).
pub fn log_norms_on_grid(spec: &OperatorSpec, energy: f64, k: usize, grid: &[f64]) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&t| {
            let mut phase = spec.phase.clone();
            phase[0] = t;
            let s = spec.with_phase(phase);
            Ok(cocycle_product(&s, energy, k)?.log_norm() / k as f64)
        })
        .collect()
}

/// θ-averaged finite-`k` Lyapunov exponent on an `M`-point grid.
pub fn lyapunov_theta_avg(spec: &OperatorSpec, energy: f64, k: usize, samples: usize) -> Result<LyapunovEstimate> {
    lyapunov_theta_avg_jittered(spec, energy, k, samples, 0.0)
}

/// As [`lyapunov_theta_avg`] with an extra shift of the θ grid.
pub fn lyapunov_theta_avg_jittered(
    spec: &OperatorSpec,
    energy: f64,
    k: usize,
    samples: usize,
    jitter: f64,
) -> Result<LyapunovEstimate> {
    if samples < 2 {
        return Err(Error::domain("θ-averaged Lyapunov exponent needs at least 2 grid points"));
    }
    if k == 0 {
        return Err(Error::domain("Lyapunov exponent needs k ≥ 1"));
    }
    let vals = log_norms_on_grid(spec, energy, k, &theta_grid(samples, jitter))?;
    let m = samples as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok(LyapunovEstimate { energy, gamma: mean, k, theta_samples: samples, stderr: (var / m).sqrt() })
}

/// Single-orbit estimate `(1/k) ln‖M_k(θ, E)‖` at the phase of `spec`.
pub fn lyapunov_orbit(spec: &OperatorSpec, energy: f64, k: usize) -> Result<LyapunovEstimate> {
    if k == 0 {
        return Err(Error::domain("Lyapunov exponent needs k ≥ 1"));
    }
    let half = (k / 2).max(1);
    let first = cocycle_product(spec, energy, half)?;
    let rest = cocycle_product_from(spec, energy, half as i64, k - half)?;
    let full = CocycleProduct::compose(&rest, &first);
    let gamma = full.log_norm() / k as f64;
    let gamma_half = first.log_norm() / half as f64;
    Ok(LyapunovEstimate { energy, gamma, k, theta_samples: 1, stderr: (gamma - gamma_half).abs() })
}

/// Richardson-style estimate `2γ_k − γ_{k/2}` cancelling the `O(1/k)` bias.
pub fn lyapunov_extrapolated(spec: &OperatorSpec, energy: f64, k: usize, samples: usize) -> Result<LyapunovEstimate> {
    let full = lyapunov_theta_avg(spec, energy, k, samples)?;
    let half = lyapunov_theta_avg(spec, energy, (k / 2).max(1), samples)?;
    Ok(LyapunovEstimate {
        gamma: 2.0 * full.gamma - half.gamma,
        stderr: (full.gamma - half.gamma).abs(),
        ..full
    })
}

/// θ-averaged estimates over an energy grid, returned in grid order.
pub fn lyapunov_curve(spec: &OperatorSpec, energies: &[f64], k: usize, samples: usize) -> Result<Vec<LyapunovEstimate>> {
    if energies.is_empty() {
        return Err(Error::domain("empty energy grid"));
    }
    if energies.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("energy grid must be sorted"));
    }
    energies.par_iter().map(|&e| lyapunov_theta_avg(spec, e, k, samples)).collect()
}

/// `acosh(|E − c| / 2)` for `|E − c| > 2`, zero otherwise: the exponent of
/// the constant cocycle `[[E − c, −1], [1, 0]]`.
pub fn constant_cocycle_exponent(energy: f64, c: f64) -> f64 {
    let x = (energy - c).abs() / 2.0;
    if x > 1.0 {
        x.acosh()
    } else {
        0.0
    }
}
