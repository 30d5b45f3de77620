//! Finite sections, eigensolution, rational band spectra, Hofstadter
//! butterfly data, integrated density of states and the Aubry duality check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{gcd, FourierPotential, FrequencyVector, Geometry, OperatorSpec};

/// Largest matrix the dense/banded solvers accept by default.
pub const DEFAULT_DIM_CAP: usize = 8192;

/// Largest period accepted by [`rational_band_spectrum`].
pub const MAX_PERIOD: u64 = 200;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryCondition {
    #[default]
    Dirichlet,
    /// Wraps the long direction with hopping `+1`.
    Periodic,
    /// Wraps the long direction with hopping `−1` (Bloch phase π).
    Antiperiodic,
}

/// Truncation of an operator to `[−N, N]` along each lattice direction.
#[derive(Clone, Debug)]
pub struct FiniteHamiltonian {
    pub spec: OperatorSpec,
    pub half_width: usize,
    pub boundary: BoundaryCondition,
    pub diag: Vec<f64>,
    /// Off-diagonal entries `(i, j, value)` with `i < j`.
    pub hops: Vec<(usize, usize, f64)>,
    /// Lattice coordinates of each basis index: `[n, 0]` on a line, `[n, s]`
    /// on a strip, `[n₁, n₂]` in a box.
    pub sites: Vec<[i64; 2]>,
}

/// Builds the finite section of `spec` on `[−N, N]` (times the strip
/// cross-section, or squared for boxes).
pub fn build_finite(spec: &OperatorSpec, half_width: usize, bc: BoundaryCondition) -> Result<FiniteHamiltonian> {
    spec.validate()?;
    if half_width == 0 {
        return Err(Error::domain("finite sections need N ≥ 1"));
    }
    let n = half_width as i64;
    let len = 2 * half_width + 1;
    let mut diag = Vec::new();
    let mut sites = Vec::new();
    let mut hops = Vec::new();
    let wrap = match bc {
        BoundaryCondition::Dirichlet => None,
        BoundaryCondition::Periodic => Some(1.0),
        BoundaryCondition::Antiperiodic => Some(-1.0),
    };
    let hop = !spec.diagonal_limit;
    match spec.geometry {
        Geometry::Line | Geometry::Strip { .. } => {
            let width = match spec.geometry {
                Geometry::Strip { width } => width,
                _ => 1,
            };
            if let Geometry::Line = spec.geometry {
                spec.line_potential()?.check_range(&(-n..n + 1))?;
            }
            for j in 0..len {
                let site = j as i64 - n;
                for s in 0..width {
                    diag.push(spec.site_potential(site, s)?);
                    sites.push([site, s as i64]);
                }
            }
            if hop {
                let idx = |j: usize, s: usize| j * width + s;
                for j in 0..len {
                    for s in 0..width {
                        if s + 1 < width {
                            hops.push((idx(j, s), idx(j, s + 1), 1.0));
                        }
                        if j + 1 < len {
                            hops.push((idx(j, s), idx(j + 1, s), 1.0));
                        }
                    }
                }
                if let Some(w) = wrap {
                    for s in 0..width {
                        hops.push((idx(0, s), idx(len - 1, s), w));
                    }
                }
            }
        }
        Geometry::Box2d => {
            for j1 in 0..len {
                for j2 in 0..len {
                    let (n1, n2) = (j1 as i64 - n, j2 as i64 - n);
                    diag.push(spec.box_potential(n1, n2)?);
                    sites.push([n1, n2]);
                }
            }
            if hop {
                let idx = |j1: usize, j2: usize| j1 * len + j2;
                for j1 in 0..len {
                    for j2 in 0..len {
                        if j2 + 1 < len {
                            hops.push((idx(j1, j2), idx(j1, j2 + 1), 1.0));
                        }
                        if j1 + 1 < len {
                            hops.push((idx(j1, j2), idx(j1 + 1, j2), 1.0));
                        }
                    }
                }
                if let Some(w) = wrap {
                    for j2 in 0..len {
                        hops.push((idx(0, j2), idx(len - 1, j2), w));
                    }
                }
            }
        }
    }
    Ok(FiniteHamiltonian { spec: spec.clone(), half_width, boundary: bc, diag, hops, sites })
}

impl FiniteHamiltonian {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Number of sites along the long direction, `2N + 1`.
    pub fn long_len(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Sites per long-direction slice (1 on a line).
    fn slice_len(&self) -> usize {
        self.dim() / self.long_len()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut a = vec![0.0; n * n];
        for (i, &d) in self.diag.iter().enumerate() {
            a[i + i * n] = d;
        }
        for &(i, j, v) in &self.hops {
            a[i + j * n] += v;
            a[j + i * n] += v;
        }
        a
    }

    /// `H x` for a real vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(d, x)| d * x).collect();
        for &(i, j, v) in &self.hops {
            y[i] += v * x[j];
            y[j] += v * x[i];
        }
        y
    }

    /// Maximum absolute row sum, an upper bound for `‖H‖₂`.
    pub fn norm_bound(&self) -> f64 {
        let mut rows: Vec<f64> = self.diag.iter().map(|d| d.abs()).collect();
        for &(i, j, v) in &self.hops {
            rows[i] += v.abs();
            rows[j] += v.abs();
        }
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Largest number of hopping partners of any site.
    pub fn max_degree(&self) -> usize {
        let mut deg = vec![0usize; self.dim()];
        for &(i, j, _) in &self.hops {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }

    /// Basis ordering used by the band solver. Wrapped sections interleave
    /// the long direction from both ends so the ring stays banded.
    fn solver_order(&self) -> Vec<usize> {
        let len = self.long_len();
        let slice = self.slice_len();
        let long_pos: Vec<usize> = if self.boundary == BoundaryCondition::Dirichlet {
            (0..len).collect()
        } else {
            let mut pos = vec![0; len];
            let (mut lo, mut hi, mut k) = (0usize, len - 1, 0usize);
            while lo <= hi {
                pos[lo] = k;
                k += 1;
                if hi != lo {
                    pos[hi] = k;
                    k += 1;
                }
                lo += 1;
                if hi == 0 {
                    break;
                }
                hi -= 1;
            }
            pos
        };
        (0..self.dim()).map(|i| long_pos[i / slice] * slice + i % slice).collect()
    }
}

/// Eigenvalues and orthonormal eigenvectors of a finite section.
#[derive(Clone, Debug)]
pub struct Eigensystem {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column-major `dim × dim`; column `j` belongs to `values[j]`.
    pub vectors: Vec<f64>,
    pub dim: usize,
}

impl Eigensystem {
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }
}

fn solve(h: &FiniteHamiltonian, vectors: bool, cap: usize) -> Result<linalg::SymmetricEigen> {
    let n = h.dim();
    if n > cap {
        return Err(Error::Size { dim: n, cap });
    }
    if h.hops.is_empty() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| h.diag[a].total_cmp(&h.diag[b]));
        let values = order.iter().map(|&i| h.diag[i]).collect();
        let vecs = vectors.then(|| {
            let mut z = vec![0.0; n * n];
            for (j, &i) in order.iter().enumerate() {
                z[i + j * n] = 1.0;
            }
            z
        });
        return Ok(linalg::SymmetricEigen { values, vectors: vecs });
    }
    let perm = h.solver_order();
    let kd = h.hops.iter().map(|&(i, j, _)| perm[i].abs_diff(perm[j])).max().unwrap_or(0);
    let mut result = if kd == 1 {
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n - 1];
        for (i, &v) in h.diag.iter().enumerate() {
            d[perm[i]] = v;
        }
        for &(i, j, v) in &h.hops {
            e[perm[i].min(perm[j])] += v;
        }
        linalg::tridiagonal(&d, &e, vectors)?
    } else {
        let ld = kd + 1;
        let mut ab = vec![0.0; ld * n];
        for (i, &v) in h.diag.iter().enumerate() {
            ab[perm[i] * ld] += v;
        }
        for &(i, j, v) in &h.hops {
            let (r, c) = (perm[i].max(perm[j]), perm[i].min(perm[j]));
            ab[(r - c) + c * ld] += v;
        }
        linalg::banded(n, kd, &ab, vectors)?
    };
    if let Some(z) = result.vectors.as_mut() {
        let permuted = std::mem::take(z);
        let mut natural = vec![0.0; n * n];
        for col in 0..n {
            for (i, &p) in perm.iter().enumerate() {
                natural[i + col * n] = permuted[p + col * n];
            }
        }
        *z = natural;
    }
    Ok(result)
}

/// Full eigendecomposition, refusing sections larger than [`DEFAULT_DIM_CAP`].
pub fn eigs(h: &FiniteHamiltonian) -> Result<Eigensystem> {
    eigs_with_cap(h, DEFAULT_DIM_CAP)
}

pub fn eigs_with_cap(h: &FiniteHamiltonian, cap: usize) -> Result<Eigensystem> {
    let r = solve(h, true, cap)?;
    Ok(Eigensystem { values: r.values, vectors: r.vectors.expect("vectors requested"), dim: h.dim() })
}

/// Eigenvalues only.
pub fn eigvals(h: &FiniteHamiltonian) -> Result<Vec<f64>> {
    Ok(solve(h, false, DEFAULT_DIM_CAP)?.values)
}

/// Point spectrum of one finite section.
pub fn point_spectrum(h: &FiniteHamiltonian) -> Result<SpectrumEstimate> {
    Ok(SpectrumEstimate::Points {
        eigenvalues: eigvals(h)?,
        half_width: h.half_width,
        boundary: h.boundary,
        thetas: vec![h.spec.phase.clone()],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// Band number counted from the bottom.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumEstimate {
    /// Eigenvalues of finite sections, sorted ascending.
    Points { eigenvalues: Vec<f64>, half_width: usize, boundary: BoundaryCondition, thetas: Vec<Vec<f64>> },
    /// Per-band θ-unions for rational frequency `p/q`.
    Bands { bands: Vec<Band>, p: u64, q: u64, theta_samples: usize },
}

impl SpectrumEstimate {
    pub fn eigenvalues(&self) -> Option<&[f64]> {
        match self {
            SpectrumEstimate::Points { eigenvalues, .. } => Some(eigenvalues),
            SpectrumEstimate::Bands { .. } => None,
        }
    }

    pub fn bands(&self) -> Option<&[Band]> {
        match self {
            SpectrumEstimate::Bands { bands, .. } => Some(bands),
            SpectrumEstimate::Points { .. } => None,
        }
    }

    /// Union of the bands as disjoint closed intervals; bands closer than
    /// `1e−9` are joined.
    pub fn merged_bands(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        let Some(bands) = self.bands() else { return out };
        let mut sorted: Vec<_> = bands.iter().map(|b| (b.lo, b.hi)).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (lo, hi) in sorted {
            match out.last_mut() {
                Some(last) if lo <= last.1 + 1e-9 => last.1 = last.1.max(hi),
                _ => out.push((lo, hi)),
            }
        }
        out
    }

    /// Sum of the widths of the merged bands.
    pub fn total_bandwidth(&self) -> f64 {
        self.merged_bands().iter().map(|(lo, hi)| hi - lo).sum()
    }

    /// Adjacent band pairs that touch or overlap (within `tol`).
    pub fn touching_pairs(&self, tol: f64) -> Vec<usize> {
        match self.bands() {
            Some(b) => b.windows(2).filter(|w| w[0].hi >= w[1].lo - tol).map(|w| w[0].index).collect(),
            None => vec![],
        }
    }
}

/// Integrated density of states: fraction of eigenvalues `≤ E`.
pub fn ids(spectrum: &SpectrumEstimate, energy: f64) -> Result<f64> {
    let ev = spectrum
        .eigenvalues()
        .ok_or_else(|| Error::Unsupported("integrated density of states of a band spectrum".into()))?;
    if ev.is_empty() {
        return Err(Error::domain("empty spectrum"));
    }
    let count = ev.partition_point(|&e| e <= energy);
    Ok(count as f64 / ev.len() as f64)
}

/// Band spectrum of `Δ + λ f(θ + n p/q)`, united over `θ_j = j/(G q)`.
///
/// For each θ the band edges are the eigenvalues of the `q × q` Bloch
/// matrices at quasimomentum 0 and π (the roots of `tr M_q(θ, E) = ±2`);
/// sorted together they pair up as `[e₀, e₁], [e₂, e₃], …`. Band `i` of the
/// result is the union over the θ grid of band `i`.
pub fn rational_band_spectrum(
    coupling: f64,
    f: &FourierPotential,
    p: u64,
    q: u64,
    theta_samples: usize,
) -> Result<SpectrumEstimate> {
    if f.dim() != 1 {
        return Err(Error::spec("band spectra need a one-frequency potential"));
    }
    if q == 0 || gcd(p, q) != 1 {
        return Err(Error::domain(format!("{p}/{q} is not a reduced fraction")));
    }
    if q > MAX_PERIOD {
        return Err(Error::Refused(format!("period {q} exceeds {MAX_PERIOD}")));
    }
    if theta_samples == 0 {
        return Err(Error::domain("θ grid must have at least one point"));
    }
    let qs = q as usize;
    let per_theta: Vec<Vec<f64>> = (0..theta_samples)
        .into_par_iter()
        .map(|j| {
            let theta = j as f64 / (theta_samples as f64 * q as f64);
            bloch_band_edges(coupling, f, p, q, theta)
        })
        .collect::<Result<_>>()?;
    let mut bands: Vec<Band> = (0..qs).map(|i| Band { index: i, lo: f64::INFINITY, hi: f64::NEG_INFINITY }).collect();
    for edges in &per_theta {
        for (i, b) in bands.iter_mut().enumerate() {
            b.lo = b.lo.min(edges[2 * i]);
            b.hi = b.hi.max(edges[2 * i + 1]);
        }
    }
    Ok(SpectrumEstimate::Bands { bands, p, q, theta_samples })
}

/// Sorted periodic and antiperiodic eigenvalues of one period cell at phase
/// `θ`; consecutive pairs are the band edges.
pub fn bloch_band_edges(coupling: f64, f: &FourierPotential, p: u64, q: u64, theta: f64) -> Result<Vec<f64>> {
    if q == 0 || f.dim() != 1 {
        return Err(Error::domain("Bloch cells need q ≥ 1 and a one-frequency potential"));
    }
    let q = q as usize;
    let potential: Vec<f64> = (0..q)
        .map(|n| coupling * f.eval(&[crate::model::frac(theta + (n as u64 * p % q as u64) as f64 / q as f64)]))
        .collect();
    let mut edges = Vec::with_capacity(2 * q);
    for twist in [1.0, -1.0] {
        let mut a = vec![0.0; q * q];
        for (i, v) in potential.iter().enumerate() {
            a[i + i * q] = *v;
        }
        if q == 1 {
            a[0] += 2.0 * twist;
        } else {
            for i in 0..q - 1 {
                a[(i + 1) + i * q] += 1.0;
                a[i + (i + 1) * q] += 1.0;
            }
            a[q - 1] += twist;
            a[(q - 1) * q] += twist;
        }
        edges.extend(linalg::dense(q, &a, false)?.values);
    }
    edges.sort_by(f64::total_cmp);
    Ok(edges)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ButterflyRow {
    pub p: u64,
    pub q: u64,
    pub bands: std::result::Result<Vec<Band>, String>,
}

/// Band spectra for every reduced `p/q ∈ [0, 1]` with `q ≤ q_max`, ordered
/// by `q` then `p`. Failures are recorded per row.
pub fn butterfly(coupling: f64, f: &FourierPotential, q_max: u64, theta_samples: usize) -> Vec<ButterflyRow> {
    let mut fractions = vec![(0, 1), (1, 1)];
    for q in 2..=q_max {
        fractions.extend((1..q).filter(|&p| gcd(p, q) == 1).map(|p| (p, q)));
    }
    fractions.sort_by_key(|&(p, q)| (q, p));
    fractions
        .into_par_iter()
        .map(|(p, q)| ButterflyRow {
            p,
            q,
            bands: rational_band_spectrum(coupling, f, p, q, theta_samples)
                .map(|s| s.bands().unwrap_or_default().to_vec())
                .map_err(|e| e.to_string()),
        })
        .collect()
}

/// Symmetric Hausdorff distance between two finite point sets.
pub fn hausdorff(a: &[f64], b: &[f64]) -> f64 {
    fn directed(from: &[f64], to: &[f64]) -> f64 {
        // both sorted: walk `to` alongside `from`
        let mut j = 0;
        let mut worst: f64 = 0.0;
        for &x in from {
            while j + 1 < to.len() && to[j + 1] <= x {
                j += 1;
            }
            let mut d = (x - to[j]).abs();
            if j + 1 < to.len() {
                d = d.min((to[j + 1] - x).abs());
            }
            worst = worst.max(d);
        }
        worst
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    directed(&a, &b).max(directed(&b, &a))
}

/// Spectrum of the almost Mathieu ring of length `2N + 1` at the seamless
/// frequency `p/(2N+1)`, united over periodic and antiperiodic wrapping and
/// `samples` phases spread across one period `1/(2N+1)`.
pub fn ring_spectrum_union(coupling: f64, omega: f64, half_width: usize, samples: usize) -> Result<Vec<f64>> {
    let len = 2 * half_width + 1;
    let p = ((omega * len as f64).round() as usize) % len;
    let freq = p as f64 / len as f64;
    let jobs: Vec<(usize, BoundaryCondition)> = (0..samples)
        .flat_map(|j| [(j, BoundaryCondition::Periodic), (j, BoundaryCondition::Antiperiodic)])
        .collect();
    let parts: Vec<Vec<f64>> = jobs
        .into_par_iter()
        .map(|(j, bc)| {
            let theta = j as f64 / (samples as f64 * len as f64);
            let mut spec = OperatorSpec::almost_mathieu(coupling, 0.0, theta)?;
            spec.frequency = FrequencyVector::scalar(freq)?;
            eigvals(&build_finite(&spec, half_width, bc)?)
        })
        .collect::<Result<_>>()?;
    let mut all: Vec<f64> = parts.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    Ok(all)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub lambda: f64,
    pub dual_lambda: f64,
    /// Energy scaling applied to the dual spectrum, `λ/2`.
    pub scale: f64,
    pub scaled_distance: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub samples: usize,
    /// Scaling minimising the distance in the validation stage.
    pub best_fit_scale: f64,
    pub validation_n: usize,
    pub validation_distance: f64,
    /// Whether the best-fit scaling matched `λ/2` within 2%.
    pub validated: bool,
}

/// Validation-stage half width.
pub const DUALITY_VALIDATION_N: usize = 200;

/// Compares `σ(H_λ)` with `(λ/2)·σ(H_{4/λ})` for the almost Mathieu family.
///
/// A first pass at `N = 200` scans the energy scaling and records the best
/// fit; the main pass measures the Hausdorff distance at the requested `N`
/// with the scaling `λ/2`.
pub fn duality_check(coupling: f64, omega: f64, half_width: usize, samples: usize) -> Result<DualityReport> {
    if !(coupling > 0.0 && coupling.is_finite()) {
        return Err(Error::Refused(format!("duality needs λ > 0 (dual coupling 4/λ), got {coupling}")));
    }
    if samples == 0 || half_width == 0 {
        return Err(Error::domain("duality check needs N ≥ 1 and at least one phase sample"));
    }
    let dual = 4.0 / coupling;
    let scale = coupling / 2.0;

    let vn = DUALITY_VALIDATION_N.min(half_width);
    let a = ring_spectrum_union(coupling, omega, vn, samples)?;
    let b = ring_spectrum_union(dual, omega, vn, samples)?;
    let (best_fit_scale, _) = best_scale(&a, &b);
    let validation_distance = scaled_distance(&a, &b, scale);
    let validated = (best_fit_scale / scale - 1.0).abs() < 0.02;

    let (a, b) = if vn == half_width {
        (a, b)
    } else {
        (ring_spectrum_union(coupling, omega, half_width, samples)?, ring_spectrum_union(dual, omega, half_width, samples)?)
    };
    Ok(DualityReport {
        lambda: coupling,
        dual_lambda: dual,
        scale,
        scaled_distance: scaled_distance(&a, &b, scale),
        n: half_width,
        samples,
        best_fit_scale,
        validation_n: vn,
        validation_distance,
        validated,
    })
}

fn scaled_distance(a: &[f64], b: &[f64], s: f64) -> f64 {
    let sb: Vec<f64> = b.iter().map(|x| s * x).collect();
    hausdorff(a, &sb)
}

/// Log-grid scan of `s ∈ [0.05, 20]` refined by golden-section search.
fn best_scale(a: &[f64], b: &[f64]) -> (f64, f64) {
    let grid = 600;
    let (lo, hi) = (0.05f64.ln(), 20f64.ln());
    let at = |i: usize| (lo + (hi - lo) * i as f64 / grid as f64).exp();
    let best = (0..=grid)
        .map(|i| (i, scaled_distance(a, b, at(i))))
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .expect("non-empty grid")
        .0;
    let (mut x0, mut x1) = (at(best.saturating_sub(1)), at((best + 1).min(grid)));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let m1 = x1 - g * (x1 - x0);
        let m2 = x0 + g * (x1 - x0);
        if scaled_distance(a, b, m1) <= scaled_distance(a, b, m2) {
            x1 = m2;
        } else {
            x0 = m1;
        }
    }
    let s = 0.5 * (x0 + x1);
    (s, scaled_distance(a, b, s))
}
