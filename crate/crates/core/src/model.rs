//! Potentials, torus orbits, frequency arithmetic and operator descriptions.
//!
//! Every operator handled by the crate has the form `H = Δ + λ V` where `Δ` is
//! the nearest-neighbour lattice Laplacian and `V_n = f(orbit_n(θ))` samples a
//! trigonometric polynomial `f` along an orbit on the torus. Torus points are
//! plain `f64` coordinates reduced to `[0, 1)` after every closed-form
//! evaluation, so orbit positions never depend on an iterated accumulation.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(√5 − 1)/2`, the frequency with the slowest continued-fraction convergence.
pub const GOLDEN_MEAN: f64 = 0.618_033_988_749_894_9;

/// Partial quotients above this bound end a continued-fraction expansion:
/// double precision cannot resolve the next convergent.
pub const NEAR_RATIONAL_GUARD: u128 = 100_000_000;

/// Fractional part in `[0, 1)`.
#[inline]
pub fn frac(x: f64) -> f64 {
    let r = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// `frac(n·x)` with the rounding error of the product folded back in, so the
/// result stays accurate to a few ulps for any `|n| < 2^53`.
#[inline]
pub fn frac_mul(n: i64, x: f64) -> f64 {
    let nf = n as f64;
    let p = nf * x;
    let err = nf.mul_add(x, -p);
    frac(frac(p) + err)
}

// ---------------------------------------------------------------------------
// Fourier potentials
// ---------------------------------------------------------------------------

/// A real trigonometric polynomial `f(θ) = Σ_k a_k e^{2πi k·θ}` on `𝕋^b`.
///
/// Coefficients are stored for both `k` and `−k` with `a_{−k} = conj(a_k)`,
/// which makes `f` real-valued. Constant functions are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PotentialRepr", into = "PotentialRepr")]
pub struct FourierPotential {
    dim: usize,
    /// Sorted by multi-index; contains every `k` together with `−k`.
    terms: Vec<(Vec<i64>, Complex64)>,
}

const CONJUGACY_TOL: f64 = 1e-12;

impl FourierPotential {
    /// `f(θ) = cos(2πθ)`, the almost Mathieu potential.
    pub fn cosine() -> Self {
        Self::from_trig(&[0.0, 1.0], &[]).expect("cosine is a valid potential")
    }

    /// One-frequency potential `Σ_j cos[j]·cos(2πjθ) + sin[j]·sin(2πjθ)`.
    ///
    /// Index `j = 0` is the constant term; `sin[0]` must vanish. A shorter
    /// `sin` slice is padded with zeros.
    pub fn from_trig(cos: &[f64], sin: &[f64]) -> Result<Self> {
        if sin.first().is_some_and(|&s| s != 0.0) {
            return Err(Error::spec("sine coefficient of harmonic 0 must be zero"));
        }
        let len = cos.len().max(sin.len());
        let mut terms = BTreeMap::new();
        for j in 0..len {
            let c = cos.get(j).copied().unwrap_or(0.0);
            let s = sin.get(j).copied().unwrap_or(0.0);
            if !c.is_finite() || !s.is_finite() {
                return Err(Error::spec("non-finite Fourier coefficient"));
            }
            if j == 0 {
                if c != 0.0 {
                    terms.insert(vec![0], Complex64::new(c, 0.0));
                }
                continue;
            }
            if c == 0.0 && s == 0.0 {
                continue;
            }
            let a = Complex64::new(c / 2.0, -s / 2.0);
            terms.insert(vec![j as i64], a);
            terms.insert(vec![-(j as i64)], a.conj());
        }
        Self::from_map(1, terms)
    }

    /// General `b`-frequency polynomial from `(k, a_k)` pairs.
    ///
    /// A missing partner `−k` is filled with `conj(a_k)`; a partner that is
    /// present must already be the conjugate.
    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::spec("frequency dimension must be positive"));
        }
        let mut map: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (k, a) in terms {
            if k.len() != dim {
                return Err(Error::spec(format!("multi-index {k:?} does not have dimension {dim}")));
            }
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(Error::spec("non-finite Fourier coefficient"));
            }
            if map.insert(k.clone(), a).is_some() {
                return Err(Error::spec(format!("duplicate multi-index {k:?}")));
            }
        }
        let keys: Vec<_> = map.keys().cloned().collect();
        for k in keys {
            let a = map[&k];
            let neg: Vec<i64> = k.iter().map(|x| -x).collect();
            if neg == k {
                if a.im.abs() > CONJUGACY_TOL {
                    return Err(Error::spec("constant Fourier term must be real"));
                }
                map.insert(k, Complex64::new(a.re, 0.0));
                continue;
            }
            match map.get(&neg) {
                Some(b) if (b - a.conj()).norm() > CONJUGACY_TOL => {
                    return Err(Error::spec(format!(
                        "coefficients at {k:?} and {neg:?} are not complex conjugates"
                    )));
                }
                Some(_) => {}
                None => {
                    map.insert(neg, a.conj());
                }
            }
        }
        Self::from_map(dim, map)
    }

    fn from_map(dim: usize, map: BTreeMap<Vec<i64>, Complex64>) -> Result<Self> {
        let terms: Vec<_> = map.into_iter().filter(|(_, a)| a.norm() > 0.0).collect();
        if !terms.iter().any(|(k, _)| k.iter().any(|&x| x != 0)) {
            return Err(Error::spec("potential must have a nonzero non-constant harmonic"));
        }
        Ok(Self { dim, terms })
    }

    /// Number of torus coordinates `b`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(Vec<i64>, Complex64)] {
        &self.terms
    }

    /// Upper bound `Σ|a_k| ≥ max_θ |f(θ)|`.
    pub fn sup_bound(&self) -> f64 {
        self.terms.iter().map(|(_, a)| a.norm()).sum()
    }

    /// Real value of `f` at `θ`; `θ.len()` must equal [`dim`](Self::dim).
    pub fn eval(&self, theta: &[f64]) -> f64 {
        debug_assert_eq!(theta.len(), self.dim);
        let mut acc = 0.0;
        for (k, a) in &self.terms {
            match half_sign(k) {
                0 => acc += a.re,
                1 => {
                    let phase = TAU * dot(k, theta);
                    let (s, c) = phase.sin_cos();
                    acc += 2.0 * (a.re * c - a.im * s);
                }
                _ => {}
            }
        }
        acc
    }

    /// Full complex sum `Σ_k a_k e^{2πik·θ}`; its imaginary part is round-off.
    pub fn eval_complex(&self, theta: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(k, a)| a * Complex64::from_polar(1.0, TAU * dot(k, theta)))
            .sum()
    }
}

fn dot(k: &[i64], theta: &[f64]) -> f64 {
    k.iter().zip(theta).map(|(&k, &t)| k as f64 * t).sum()
}

/// 0 for the zero index, 1 for the "positive" representative of ±k (first
/// nonzero entry positive), −1 otherwise.
fn half_sign(k: &[i64]) -> i8 {
    match k.iter().find(|&&x| x != 0) {
        None => 0,
        Some(&x) if x > 0 => 1,
        Some(_) => -1,
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PotentialRepr {
    Trig {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Terms {
        dim: usize,
        terms: Vec<TermRepr>,
    },
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    k: Vec<i64>,
    re: f64,
    #[serde(default)]
    im: f64,
}

impl TryFrom<PotentialRepr> for FourierPotential {
    type Error = Error;

    fn try_from(r: PotentialRepr) -> Result<Self> {
        match r {
            PotentialRepr::Trig { cos, sin } => Self::from_trig(&cos, &sin),
            PotentialRepr::Terms { dim, terms } => {
                Self::from_terms(dim, terms.into_iter().map(|t| (t.k, Complex64::new(t.re, t.im))))
            }
        }
    }
}

impl From<FourierPotential> for PotentialRepr {
    fn from(f: FourierPotential) -> Self {
        if f.dim == 1 {
            let order = f.terms.iter().map(|(k, _)| k[0].unsigned_abs() as usize).max().unwrap_or(0);
            let mut cos = vec![0.0; order + 1];
            let mut sin = vec![0.0; order + 1];
            for (k, a) in &f.terms {
                let j = k[0];
                if j == 0 {
                    cos[0] = a.re;
                } else if j > 0 {
                    cos[j as usize] = 2.0 * a.re;
                    sin[j as usize] = -2.0 * a.im;
                }
            }
            PotentialRepr::Trig { cos, sin }
        } else {
            PotentialRepr::Terms {
                dim: f.dim,
                terms: f
                    .terms
                    .into_iter()
                    .filter(|(k, _)| half_sign(k) >= 0)
                    .map(|(k, a)| TermRepr { k, re: a.re, im: a.im })
                    .collect(),
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Frequencies and continued fractions
// ---------------------------------------------------------------------------

/// Frequency vector `ω ∈ [0,1)^b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyVector(Vec<f64>);

impl FrequencyVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::spec("frequency vector is empty"));
        }
        if let Some(w) = components.iter().find(|w| !(0.0..1.0).contains(*w)) {
            return Err(Error::spec(format!("frequency component {w} is outside [0, 1)")));
        }
        Ok(Self(components))
    }

    pub fn scalar(omega: f64) -> Result<Self> {
        Self::new(vec![omega])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Continued-fraction data of a one-frequency vector.
    pub fn continued_fraction(&self, depth: usize) -> Result<ContinuedFraction> {
        match self.0.as_slice() {
            [w] => continued_fraction(*w, depth),
            _ => Err(Error::Unsupported("continued fractions of multi-frequency vectors".into())),
        }
    }
}

impl TryFrom<Vec<f64>> for FrequencyVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyVector> for Vec<f64> {
    fn from(f: FrequencyVector) -> Self {
        f.0
    }
}

/// Why a continued-fraction expansion stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The requested number of quotients was produced.
    Depth,
    /// The input is an exact rational and the expansion is complete.
    Rational,
    /// The next quotient exceeded [`NEAR_RATIONAL_GUARD`].
    NearRational,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuedFraction {
    /// Partial quotients `a_1, a_2, …` of `ω = [0; a_1, a_2, …]`.
    pub quotients: Vec<u128>,
    /// Convergents `p_k/q_k` in lowest terms, one per quotient.
    pub convergents: Vec<(u128, u128)>,
    pub termination: Termination,
}

impl ContinuedFraction {
    pub fn is_rational(&self) -> bool {
        self.termination == Termination::Rational
    }
}

/// Continued-fraction expansion of `ω ∈ (0, 1)` up to `depth` quotients.
///
/// The double `ω` is an exact dyadic rational, so the expansion runs Euclid's
/// algorithm on its integer numerator and denominator and is free of the
/// error growth of the floating-point Gauss map.
pub fn continued_fraction(omega: f64, depth: usize) -> Result<ContinuedFraction> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::domain(format!("continued fraction needs ω in (0, 1), got {omega}")));
    }
    let mut out = ContinuedFraction { quotients: vec![], convergents: vec![], termination: Termination::Depth };
    let Some((num, den)) = dyadic_parts(omega) else {
        out.termination = Termination::NearRational;
        return Ok(out);
    };
    // ω = num/den; the expansion of ω is Euclid on (den, num).
    let (mut p, mut q) = (den, num);
    let (mut h_prev, mut h) = (1u128, 0u128);
    let (mut k_prev, mut k) = (0u128, 1u128);
    while out.quotients.len() < depth {
        if q == 0 {
            out.termination = Termination::Rational;
            return Ok(out);
        }
        let a = p / q;
        if a > NEAR_RATIONAL_GUARD {
            out.termination = Termination::NearRational;
            return Ok(out);
        }
        (p, q) = (q, p % q);
        (h_prev, h) = (h, a * h + h_prev);
        (k_prev, k) = (k, a * k + k_prev);
        out.quotients.push(a);
        out.convergents.push((h, k));
    }
    if q == 0 {
        out.termination = Termination::Rational;
    }
    Ok(out)
}

/// `x = num / den` exactly with `den` a power of two, when it fits in `u128`.
fn dyadic_parts(x: f64) -> Option<(u128, u128)> {
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let mut mant = (bits & ((1u64 << 52) - 1)) as u128;
    let mut e = if exp == 0 { -1074 } else { exp - 1075 };
    if exp != 0 {
        mant |= 1 << 52;
    }
    while mant & 1 == 0 && e < 0 {
        mant >>= 1;
        e += 1;
    }
    let shift = (-e) as u32;
    (shift < 127).then(|| (mant, 1u128 << shift))
}

/// Greatest common divisor.
pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

// ---------------------------------------------------------------------------
// Orbits
// ---------------------------------------------------------------------------

/// Which torus dynamics generates the phases `θ_n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrbitKind {
    /// `θ_n = θ + nω` on `𝕋^b`.
    #[default]
    Shift,
    /// Skew shift `T(x₁,x₂) = (x₁+ω, x₂+x₁)` on `𝕋²`; the potential reads `x₂`.
    SkewShift,
    /// `θ_n = n^σ α + θ` with `σ > 1`, `α` taken from the frequency.
    Monomial { sigma: f64 },
}

/// A fully parameterised orbit generator.
#[derive(Clone, Debug, PartialEq)]
pub enum OrbitGenerator {
    Shift { omega: Vec<f64> },
    SkewShift { omega: f64 },
    Monomial { sigma: f64, alpha: f64 },
}

impl OrbitGenerator {
    /// Torus point reached after `n` steps from `start`, by closed form.
    pub fn phase(&self, start: &[f64], n: i64) -> Result<Vec<f64>> {
        match self {
            OrbitGenerator::Shift { omega } => {
                if start.len() != omega.len() {
                    return Err(Error::spec("shift orbit: phase and frequency dimensions differ"));
                }
                Ok(start.iter().zip(omega).map(|(&t, &w)| frac(t + frac_mul(n, w))).collect())
            }
            OrbitGenerator::SkewShift { omega } => {
                let [x1, x2] = start else {
                    return Err(Error::spec("skew shift acts on 𝕋²; phase must have two coordinates"));
                };
                // T^n(x) = (x₁ + nω, x₂ + n x₁ + n(n−1)/2 ω), valid for every integer n
                let tri = n * (n - 1) / 2;
                Ok(vec![
                    frac(x1 + frac_mul(n, *omega)),
                    frac(x2 + frac_mul(n, *x1) + frac_mul(tri, *omega)),
                ])
            }
            OrbitGenerator::Monomial { sigma, alpha } => {
                if n < 0 {
                    return Err(Error::domain(format!("monomial phase undefined at negative site {n}")));
                }
                let [t] = start else {
                    return Err(Error::spec("monomial phase orbit is one-dimensional"));
                };
                let v = (n as f64).powf(*sigma) * alpha;
                Ok(vec![frac(frac(v) + t)])
            }
        }
    }

    /// The coordinates of an orbit point that the potential is evaluated at.
    pub fn potential_argument<'a>(&self, point: &'a [f64]) -> &'a [f64] {
        match self {
            OrbitGenerator::SkewShift { .. } => &point[1..],
            _ => point,
        }
    }

    /// Applies the map once; used to cross-check closed forms.
    pub fn step(&self, point: &[f64]) -> Result<Vec<f64>> {
        match self {
            OrbitGenerator::Shift { omega } => Ok(point.iter().zip(omega).map(|(t, w)| frac(t + w)).collect()),
            OrbitGenerator::SkewShift { omega } => Ok(vec![frac(point[0] + omega), frac(point[1] + point[0])]),
            OrbitGenerator::Monomial { .. } => Err(Error::Unsupported("monomial phase is not a map".into())),
        }
    }
}

/// Free function form of [`OrbitGenerator::phase`].
pub fn orbit_phase(g: &OrbitGenerator, start: &[f64], n: i64) -> Result<Vec<f64>> {
    g.phase(start, n)
}

// ---------------------------------------------------------------------------
// Operator specification
// ---------------------------------------------------------------------------

/// Lattice the operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    /// `ℤ`.
    Line,
    /// `ℤ × S₀` with `S₀ = {0, …, width−1}` carrying the path metric.
    Strip { width: usize },
    /// `ℤ²`, truncated to square boxes.
    Box2d,
}

/// Complete description of `H = Δ + λV` on a line, strip or planar box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorSpecRepr", into = "OperatorSpecRepr")]
pub struct OperatorSpec {
    pub geometry: Geometry,
    /// Coupling `λ ≥ 0`.
    pub coupling: f64,
    /// One potential for line and box geometries, `width` potentials `f_s`
    /// for strips.
    pub potentials: Vec<FourierPotential>,
    pub frequency: FrequencyVector,
    /// Initial torus point `θ`.
    pub phase: Vec<f64>,
    pub orbit: OrbitKind,
    /// Drop the Laplacian: the `λ⁻¹ = 0` limit, `H = λV`.
    pub diagonal_limit: bool,
}

#[derive(Serialize, Deserialize)]
struct OperatorSpecRepr {
    #[serde(default = "default_geometry")]
    geometry: Geometry,
    coupling: f64,
    #[serde(default)]
    potential: Option<FourierPotential>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    strip_potentials: Vec<FourierPotential>,
    frequency: FrequencyVector,
    phase: Vec<f64>,
    #[serde(default)]
    orbit: OrbitKind,
    #[serde(default)]
    diagonal_limit: bool,
}

fn default_geometry() -> Geometry {
    Geometry::Line
}

impl TryFrom<OperatorSpecRepr> for OperatorSpec {
    type Error = Error;

    fn try_from(r: OperatorSpecRepr) -> Result<Self> {
        let potentials = match (r.potential, r.strip_potentials.is_empty()) {
            (Some(p), true) => vec![p],
            (None, false) => r.strip_potentials,
            (Some(_), false) => {
                return Err(Error::spec("give either `potential` or `strip_potentials`, not both"))
            }
            (None, true) => return Err(Error::spec("missing `potential`")),
        };
        let spec = OperatorSpec {
            geometry: r.geometry,
            coupling: r.coupling,
            potentials,
            frequency: r.frequency,
            phase: r.phase,
            orbit: r.orbit,
            diagonal_limit: r.diagonal_limit,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<OperatorSpec> for OperatorSpecRepr {
    fn from(s: OperatorSpec) -> Self {
        let strip = matches!(s.geometry, Geometry::Strip { .. });
        let mut potentials = s.potentials;
        OperatorSpecRepr {
            geometry: s.geometry,
            coupling: s.coupling,
            potential: if strip { None } else { potentials.pop() },
            strip_potentials: if strip { potentials } else { vec![] },
            frequency: s.frequency,
            phase: s.phase,
            orbit: s.orbit,
            diagonal_limit: s.diagonal_limit,
        }
    }
}

impl OperatorSpec {
    /// Almost Mathieu operator `Δ + λ cos(2π(θ + nω))` on `ℤ`.
    pub fn almost_mathieu(coupling: f64, omega: f64, theta: f64) -> Result<Self> {
        let spec = OperatorSpec {
            geometry: Geometry::Line,
            coupling,
            potentials: vec![FourierPotential::cosine()],
            frequency: FrequencyVector::scalar(frac(omega))?,
            phase: vec![frac(theta)],
            orbit: OrbitKind::Shift,
            diagonal_limit: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("operator spec serialises")
    }

    /// Checks every structural invariant; constructors and deserialisation
    /// call this, callers mutating public fields should too.
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return Err(Error::spec(format!("coupling must be finite and ≥ 0, got {}", self.coupling)));
        }
        if let Some(t) = self.phase.iter().find(|t| !t.is_finite()) {
            return Err(Error::spec(format!("non-finite phase component {t}")));
        }
        let expected = match self.geometry {
            Geometry::Line | Geometry::Box2d => 1,
            Geometry::Strip { width } => {
                if width == 0 {
                    return Err(Error::spec("strip width must be at least 1"));
                }
                width
            }
        };
        if self.potentials.len() != expected {
            return Err(Error::spec(format!(
                "geometry needs {expected} potential function(s), got {}",
                self.potentials.len()
            )));
        }
        let b = self.frequency.dim();
        let pot_dim = self.potentials[0].dim();
        if self.potentials.iter().any(|p| p.dim() != pot_dim) {
            return Err(Error::spec("strip potentials must share the frequency dimension"));
        }
        match self.orbit {
            OrbitKind::Shift => {
                if pot_dim != b || self.phase.len() != b {
                    return Err(Error::spec(format!(
                        "shift orbit needs potential, phase and frequency of equal dimension (got {pot_dim}, {}, {b})",
                        self.phase.len()
                    )));
                }
            }
            OrbitKind::SkewShift => {
                if b != 1 || pot_dim != 1 || self.phase.len() != 2 {
                    return Err(Error::spec("skew shift needs scalar ω, a one-frequency potential and a phase in 𝕋²"));
                }
            }
            OrbitKind::Monomial { sigma } => {
                if !(sigma > 1.0 && sigma.is_finite()) {
                    return Err(Error::spec(format!("monomial phase needs σ > 1, got {sigma}")));
                }
                if b != 1 || pot_dim != 1 || self.phase.len() != 1 {
                    return Err(Error::spec("monomial phase is one-dimensional"));
                }
            }
        }
        if self.geometry == Geometry::Box2d && (b != 2 || self.orbit != OrbitKind::Shift) {
            return Err(Error::spec("2D box geometry requires a shift orbit with b = 2"));
        }
        Ok(())
    }

    pub fn orbit_generator(&self) -> OrbitGenerator {
        let w = self.frequency.components();
        match self.orbit {
            OrbitKind::Shift => OrbitGenerator::Shift { omega: w.to_vec() },
            OrbitKind::SkewShift => OrbitGenerator::SkewShift { omega: w[0] },
            OrbitKind::Monomial { sigma } => OrbitGenerator::Monomial { sigma, alpha: w[0] },
        }
    }

    /// Copy with a different coupling.
    pub fn with_coupling(&self, coupling: f64) -> Self {
        Self { coupling, ..self.clone() }
    }

    /// Copy with a different initial phase.
    pub fn with_phase(&self, phase: Vec<f64>) -> Self {
        Self { phase, ..self.clone() }
    }

    /// Fast evaluator of `V_n` for line geometries.
    pub fn line_potential(&self) -> Result<LinePotential<'_>> {
        if self.geometry != Geometry::Line {
            return Err(Error::spec("line potential requested for a non-line geometry"));
        }
        Ok(LinePotential { spec: self, orbit: self.orbit_generator() })
    }

    /// `λ f_s(orbit_n(θ))` for one strip row (`s = 0` on a line).
    pub fn site_potential(&self, n: i64, s: usize) -> Result<f64> {
        let g = self.orbit_generator();
        let point = g.phase(&self.phase, n)?;
        Ok(self.coupling * self.potentials[s].eval(g.potential_argument(&point)))
    }

    /// `λ f(θ₁ + n₁ω₁, θ₂ + n₂ω₂)` for planar boxes.
    pub fn box_potential(&self, n1: i64, n2: i64) -> Result<f64> {
        if self.geometry != Geometry::Box2d {
            return Err(Error::spec("box potential requested for a non-box geometry"));
        }
        let w = self.frequency.components();
        let point = [frac(self.phase[0] + frac_mul(n1, w[0])), frac(self.phase[1] + frac_mul(n2, w[1]))];
        Ok(self.coupling * self.potentials[0].eval(&point))
    }
}

/// Cached evaluator for `V_n = λ f(orbit_n(θ))` on a line.
pub struct LinePotential<'a> {
    spec: &'a OperatorSpec,
    orbit: OrbitGenerator,
}

impl LinePotential<'_> {
    /// Value at site `n`; errors only for negative sites of a monomial orbit.
    #[inline]
    pub fn value(&self, n: i64) -> Result<f64> {
        let f = &self.spec.potentials[0];
        let lambda = self.spec.coupling;
        match &self.orbit {
            OrbitGenerator::Shift { omega } if omega.len() == 1 => {
                Ok(lambda * f.eval(&[frac(self.spec.phase[0] + frac_mul(n, omega[0]))]))
            }
            g => {
                let p = g.phase(&self.spec.phase, n)?;
                Ok(lambda * f.eval(g.potential_argument(&p)))
            }
        }
    }

    /// Whether every site in `range` is admissible.
    pub fn check_range(&self, range: &Range<i64>) -> Result<()> {
        if matches!(self.orbit, OrbitGenerator::Monomial { .. }) && range.start < 0 {
            return Err(Error::domain("monomial phase orbits are defined for n ≥ 0 only"));
        }
        Ok(())
    }
}

/// `V_n` over `range`: one row per site, with one entry per strip row
/// (a single entry on a line).
pub fn potential_sequence(spec: &OperatorSpec, range: Range<i64>) -> Result<Vec<Vec<f64>>> {
    let rows = match spec.geometry {
        Geometry::Line => 1,
        Geometry::Strip { width } => width,
        Geometry::Box2d => return Err(Error::spec("potential sequences are defined for line and strip geometries")),
    };
    range.map(|n| (0..rows).map(|s| spec.site_potential(n, s)).collect()).collect()
}
