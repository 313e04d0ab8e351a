//! Potential families, the canonical ensemble and mechanical-equilibrium search.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Polynomials above this degree are differentiated numerically.
const MAX_ANALYTIC_DEGREE: usize = 24;
const FD_STEP_FIRST: f64 = 1e-6;
const FD_STEP_SECOND: f64 = 1e-4;

/// Curvature below this magnitude classifies an equilibrium as degenerate.
pub const DEGENERATE_CURVATURE: f64 = 1e-9;
/// Default number of bracketing subintervals in [`find_equilibria`].
pub const DEFAULT_SUBINTERVALS: usize = 2048;
/// Default root tolerance on `|V'(q0)|`.
pub const DEFAULT_ROOT_TOLERANCE: f64 = 1e-12;

fn one() -> f64 {
    1.0
}

/// A one-dimensional potential `V(q)` together with the mass of its coordinate.
///
/// | family       | `V(q)`                         | domain        |
/// |--------------|--------------------------------|---------------|
/// | `harmonic`   | `m ω² q² / 2`                  | real line     |
/// | `polynomial` | `Σ c_k q^k`                    | real line     |
/// | `quartic`    | `λ q⁴ / 4`                     | real line     |
/// | `pendulum`   | `−g cos q`                     | real line, period 2π |
/// | `rotor`      | `0`                            | `[0, 2π]`, periodic |
/// | `morse`      | `D (1 − e^{−a q})²`            | real line     |
/// | `free`       | `0`                            | real line     |
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Harmonic {
        #[serde(default = "one")]
        m: f64,
        omega: f64,
    },
    Polynomial {
        #[serde(default = "one")]
        m: f64,
        coeffs: Vec<f64>,
    },
    Quartic {
        #[serde(default = "one")]
        m: f64,
        #[serde(default = "one")]
        lambda: f64,
    },
    Pendulum {
        #[serde(default = "one")]
        m: f64,
        #[serde(default = "one")]
        g: f64,
    },
    Rotor {
        #[serde(default = "one")]
        inertia: f64,
    },
    Morse {
        #[serde(default = "one")]
        m: f64,
        depth: f64,
        width: f64,
    },
    Free {
        #[serde(default = "one")]
        m: f64,
    },
}

/// Value, slope and curvature of a potential at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PotentialEval {
    pub value: f64,
    pub slope: f64,
    pub curvature: f64,
}

impl PotentialSpec {
    pub fn harmonic(m: f64, omega: f64) -> Self {
        Self::Harmonic { m, omega }
    }

    pub fn quartic(m: f64, lambda: f64) -> Self {
        Self::Quartic { m, lambda }
    }

    pub fn polynomial(m: f64, coeffs: Vec<f64>) -> Self {
        Self::Polynomial { m, coeffs }
    }

    pub fn pendulum(m: f64, g: f64) -> Self {
        Self::Pendulum { m, g }
    }

    pub fn rotor(inertia: f64) -> Self {
        Self::Rotor { inertia }
    }

    pub fn morse(m: f64, depth: f64, width: f64) -> Self {
        Self::Morse { m, depth, width }
    }

    pub fn free(m: f64) -> Self {
        Self::Free { m }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Self::Harmonic { .. } => "harmonic",
            Self::Polynomial { .. } => "polynomial",
            Self::Quartic { .. } => "quartic",
            Self::Pendulum { .. } => "pendulum",
            Self::Rotor { .. } => "rotor",
            Self::Morse { .. } => "morse",
            Self::Free { .. } => "free",
        }
    }

    /// Mass (moment of inertia for the rotor) of the coordinate.
    pub fn mass(&self) -> f64 {
        match *self {
            Self::Harmonic { m, .. }
            | Self::Polynomial { m, .. }
            | Self::Quartic { m, .. }
            | Self::Pendulum { m, .. }
            | Self::Morse { m, .. }
            | Self::Free { m } => m,
            Self::Rotor { inertia } => inertia,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive(if matches!(self, Self::Rotor { .. }) { "inertia" } else { "m" }, self.mass())?;
        match self {
            Self::Harmonic { omega, .. } => ensure_positive("omega", *omega),
            Self::Polynomial { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter {
                        name: "coeffs",
                        reason: "at least one coefficient is required".into(),
                    });
                }
                coeffs.iter().try_for_each(|&c| ensure_finite("coeffs", c))
            }
            Self::Quartic { lambda, .. } => ensure_positive("lambda", *lambda),
            Self::Pendulum { g, .. } => ensure_positive("g", *g),
            Self::Morse { depth, width, .. } => {
                ensure_positive("depth", *depth)?;
                ensure_positive("width", *width)
            }
            Self::Rotor { .. } | Self::Free { .. } => Ok(()),
        }
    }

    /// Coordinate period for cyclic coordinates.
    pub fn period(&self) -> Option<f64> {
        match self {
            Self::Rotor { .. } | Self::Pendulum { .. } => Some(TAU),
            _ => None,
        }
    }

    /// Whether `V` grows without bound (or, for Morse, up to the dissociation
    /// limit) on both sides of its minimum.
    pub fn is_confining(&self) -> bool {
        match self {
            Self::Harmonic { .. } | Self::Quartic { .. } | Self::Morse { .. } => true,
            Self::Polynomial { coeffs, .. } => {
                let lead = leading(coeffs);
                lead.map(|(deg, c)| deg >= 2 && deg % 2 == 0 && c > 0.0).unwrap_or(false)
            }
            _ => false,
        }
    }

    /// Energy above which a Morse orbit is unbounded.
    pub fn dissociation_energy(&self) -> Option<f64> {
        match *self {
            Self::Morse { depth, .. } => Some(depth),
            _ => None,
        }
    }

    fn check_domain(&self, q: f64) -> Result<()> {
        if !q.is_finite() {
            return Err(Error::Domain {
                family: self.family(),
                q,
                domain: "finite reals".into(),
            });
        }
        if let Self::Rotor { .. } = self {
            if !(0.0..=TAU).contains(&q) {
                return Err(Error::Domain {
                    family: "rotor",
                    q,
                    domain: "[0, 2π]; reduce the angle first".into(),
                });
            }
        }
        Ok(())
    }

    /// `V`, `V'` and `V''` at `q`.
    pub fn eval(&self, q: f64) -> Result<PotentialEval> {
        self.check_domain(q)?;
        Ok(self.eval_unchecked(q))
    }

    pub(crate) fn eval_unchecked(&self, q: f64) -> PotentialEval {
        match *self {
            Self::Harmonic { m, omega } => {
                let k = m * omega * omega;
                PotentialEval {
                    value: 0.5 * k * q * q,
                    slope: k * q,
                    curvature: k,
                }
            }
            Self::Polynomial { ref coeffs, .. } => {
                if coeffs.len() > MAX_ANALYTIC_DEGREE + 1 {
                    let f = |x: f64| horner(coeffs, x);
                    let h1 = FD_STEP_FIRST;
                    let h2 = FD_STEP_SECOND;
                    let v = f(q);
                    PotentialEval {
                        value: v,
                        slope: (f(q + h1) - f(q - h1)) / (2.0 * h1),
                        curvature: (f(q + h2) - 2.0 * v + f(q - h2)) / (h2 * h2),
                    }
                } else {
                    polynomial_with_derivatives(coeffs, q)
                }
            }
            Self::Quartic { lambda, .. } => PotentialEval {
                value: 0.25 * lambda * q.powi(4),
                slope: lambda * q.powi(3),
                curvature: 3.0 * lambda * q * q,
            },
            Self::Pendulum { g, .. } => {
                let (s, c) = q.sin_cos();
                PotentialEval {
                    value: -g * c,
                    slope: g * s,
                    curvature: g * c,
                }
            }
            Self::Rotor { .. } | Self::Free { .. } => PotentialEval {
                value: 0.0,
                slope: 0.0,
                curvature: 0.0,
            },
            Self::Morse { depth, width, .. } => {
                let e = (-width * q).exp();
                let u = 1.0 - e;
                PotentialEval {
                    value: depth * u * u,
                    slope: 2.0 * depth * width * e * u,
                    curvature: 2.0 * depth * width * width * e * (2.0 * e - 1.0),
                }
            }
        }
    }

    pub(crate) fn value_unchecked(&self, q: f64) -> f64 {
        match self {
            Self::Polynomial { coeffs, .. } => horner(coeffs, q),
            _ => self.eval_unchecked(q).value,
        }
    }

    /// Location and value of the global minimum, when `V` is bounded below.
    ///
    /// Flat potentials report `(0, V(0))`.
    pub fn global_minimum(&self) -> Option<(f64, f64)> {
        match self {
            Self::Harmonic { .. }
            | Self::Quartic { .. }
            | Self::Pendulum { .. }
            | Self::Morse { .. }
            | Self::Rotor { .. }
            | Self::Free { .. } => Some((0.0, self.value_unchecked(0.0))),
            Self::Polynomial { coeffs, .. } => {
                let Some((deg, lead)) = leading(coeffs) else {
                    return Some((0.0, 0.0));
                };
                if deg == 0 {
                    return Some((0.0, coeffs[0]));
                }
                if deg % 2 == 1 || lead < 0.0 {
                    return None;
                }
                // Cauchy bound on the real roots of V'.
                let bound = 1.0
                    + (1..deg)
                        .map(|k| (k as f64 * coeffs[k]).abs() / (deg as f64 * lead))
                        .fold(0.0, f64::max);
                let span = bound + 1.0;
                find_equilibria(self, (-span, span), DEFAULT_ROOT_TOLERANCE)
                    .ok()?
                    .into_iter()
                    .filter(|p| p.stability != Stability::Maximum)
                    .map(|p| (p.q0, self.value_unchecked(p.q0)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
            }
        }
    }

    /// Largest value of `V` over one coordinate period (periodic families only).
    pub fn max_over_period(&self) -> Option<f64> {
        match *self {
            Self::Pendulum { g, .. } => Some(g),
            Self::Rotor { .. } => Some(0.0),
            _ => None,
        }
    }
}

fn leading(coeffs: &[f64]) -> Option<(usize, f64)> {
    coeffs
        .iter()
        .enumerate()
        .rev()
        .find(|(_, c)| **c != 0.0)
        .map(|(k, c)| (k, *c))
}

fn horner(coeffs: &[f64], q: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * q + c)
}

fn polynomial_with_derivatives(coeffs: &[f64], q: f64) -> PotentialEval {
    let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for &c in coeffs.iter().rev() {
        d2 = d2 * q + 2.0 * d1;
        d1 = d1 * q + v;
        v = v * q + c;
    }
    PotentialEval {
        value: v,
        slope: d1,
        curvature: d2,
    }
}

/// A sum of independent one-dimensional potentials, one per degree of freedom.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparablePotential {
    pub components: Vec<PotentialSpec>,
}

impl SeparablePotential {
    pub fn new(components: Vec<PotentialSpec>) -> Self {
        Self { components }
    }

    pub fn dof(&self) -> usize {
        self.components.len()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.components.iter().map(PotentialSpec::mass).collect()
    }

    fn check_len(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::InvalidParameter {
                name: "q",
                reason: format!("expected {} coordinates, got {}", self.dof(), q.len()),
            });
        }
        Ok(())
    }

    /// Per-coordinate evaluations at `q`.
    pub fn eval(&self, q: &[f64]) -> Result<Vec<PotentialEval>> {
        self.check_len(q)?;
        self.components.iter().zip(q).map(|(c, &x)| c.eval(x)).collect()
    }

    pub fn value(&self, q: &[f64]) -> Result<f64> {
        Ok(self.eval(q)?.iter().map(|e| e.value).sum())
    }
}

impl From<PotentialSpec> for SeparablePotential {
    fn from(spec: PotentialSpec) -> Self {
        Self::new(vec![spec])
    }
}

/// Canonical ensemble parameters. The phase-space density is `C e^{−2βH}`
/// with `2β = 1/(k_B T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalEnsemble {
    pub beta: f64,
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "k_B", default = "one")]
    pub k_b: f64,
    /// Optional per-coordinate masses; when present they must agree with the
    /// masses carried by the potential.
    #[serde(default)]
    pub masses: Vec<f64>,
}

impl CanonicalEnsemble {
    /// Natural units: `ħ = k_B = 1`.
    pub fn natural(beta: f64) -> Self {
        Self {
            beta,
            hbar: 1.0,
            k_b: 1.0,
            masses: Vec::new(),
        }
    }

    pub fn with_hbar(mut self, hbar: f64) -> Self {
        self.hbar = hbar;
        self
    }

    pub fn with_k_b(mut self, k_b: f64) -> Self {
        self.k_b = k_b;
        self
    }

    /// Ensemble at temperature `T`, i.e. `β = 1/(2 k_B T)`.
    pub fn from_temperature(temperature: f64, hbar: f64, k_b: f64) -> Result<Self> {
        ensure_positive("temperature", temperature)?;
        let ens = Self {
            beta: 1.0 / (2.0 * k_b * temperature),
            hbar,
            k_b,
            masses: Vec::new(),
        };
        ens.validate()?;
        Ok(ens)
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("beta", self.beta)?;
        ensure_positive("hbar", self.hbar)?;
        ensure_positive("k_B", self.k_b)?;
        self.masses.iter().try_for_each(|&m| ensure_positive("masses", m))
    }

    /// Check the ensemble against a potential: valid parameters and, when
    /// masses are listed, agreement with the potential's own masses.
    pub fn validate_for(&self, masses: &[f64]) -> Result<()> {
        self.validate()?;
        if self.masses.is_empty() {
            return Ok(());
        }
        let agrees = self.masses.len() == masses.len()
            && self
                .masses
                .iter()
                .zip(masses)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()));
        if agrees {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "masses",
                reason: format!("ensemble masses {:?} disagree with potential masses {:?}", self.masses, masses),
            })
        }
    }

    /// `T = 1/(2 β k_B)`.
    pub fn temperature(&self) -> f64 {
        1.0 / (2.0 * self.beta * self.k_b)
    }

    /// `k_B T`.
    pub fn thermal_energy(&self) -> f64 {
        1.0 / (2.0 * self.beta)
    }

    /// Largest displacement treated as infinitesimal for mass `m`:
    /// `0.2 √(β ħ² / m)`.
    pub fn infinitesimal_bound(&self, m: f64) -> f64 {
        0.2 * (self.beta * self.hbar * self.hbar / m).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Minimum,
    Maximum,
    Degenerate,
}

impl Stability {
    pub fn from_curvature(curvature: f64) -> Self {
        if curvature.abs() <= DEGENERATE_CURVATURE {
            Self::Degenerate
        } else if curvature > 0.0 {
            Self::Minimum
        } else {
            Self::Maximum
        }
    }
}

/// A point where `V'(q0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumPoint {
    pub q0: f64,
    pub curvature: f64,
    pub stability: Stability,
}

impl EquilibriumPoint {
    pub fn at(spec: &PotentialSpec, q0: f64) -> Result<Self> {
        let curvature = spec.eval(q0)?.curvature;
        Ok(Self {
            q0,
            curvature,
            stability: Stability::from_curvature(curvature),
        })
    }
}

/// Mechanical equilibria of `spec` inside `interval`, sorted by position.
///
/// Uses [`DEFAULT_SUBINTERVALS`] bracketing cells; see [`find_equilibria_with`].
pub fn find_equilibria(
    spec: &PotentialSpec,
    interval: (f64, f64),
    tolerance: f64,
) -> Result<Vec<EquilibriumPoint>> {
    find_equilibria_with(spec, interval, tolerance, DEFAULT_SUBINTERVALS)
}

/// Scan `interval` on a uniform grid of `subintervals` cells, bisect every sign
/// change of `V'`, and collapse runs of grid samples with `|V'| ≤ tolerance`
/// (plateaus) into one point each.
pub fn find_equilibria_with(
    spec: &PotentialSpec,
    interval: (f64, f64),
    tolerance: f64,
    subintervals: usize,
) -> Result<Vec<EquilibriumPoint>> {
    spec.validate()?;
    let (lo, hi) = interval;
    ensure_finite("interval", lo)?;
    ensure_finite("interval", hi)?;
    if lo >= hi {
        return Err(Error::InvalidParameter {
            name: "interval",
            reason: format!("empty interval [{lo}, {hi}]"),
        });
    }
    ensure_positive("tolerance", tolerance)?;
    if subintervals == 0 {
        return Err(Error::InvalidParameter {
            name: "subintervals",
            reason: "must be at least 1".into(),
        });
    }

    let step = (hi - lo) / subintervals as f64;
    let xs: Vec<f64> = (0..=subintervals)
        .map(|i| if i == subintervals { hi } else { lo + i as f64 * step })
        .collect();
    let slopes = xs
        .iter()
        .map(|&x| spec.eval(x).map(|e| e.slope))
        .collect::<Result<Vec<_>>>()?;

    let mut roots: Vec<f64> = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        if slopes[i].abs() <= tolerance {
            let start = i;
            while i + 1 < xs.len() && slopes[i + 1].abs() <= tolerance {
                i += 1;
            }
            let best = (start..=i)
                .min_by(|&a, &b| {
                    slopes[a]
                        .abs()
                        .total_cmp(&slopes[b].abs())
                        .then((2 * a).abs_diff(start + i).cmp(&(2 * b).abs_diff(start + i)))
                })
                .unwrap_or(start);
            roots.push(xs[best]);
        }
        i += 1;
    }
    for k in 0..subintervals {
        let (a, b) = (slopes[k], slopes[k + 1]);
        if a.abs() <= tolerance || b.abs() <= tolerance {
            continue;
        }
        if a.signum() != b.signum() {
            if let Some(root) = bisect_slope(spec, xs[k], xs[k + 1], a, tolerance) {
                roots.push(root);
            }
        }
    }
    roots.sort_by(f64::total_cmp);

    let mut merged: Vec<f64> = Vec::with_capacity(roots.len());
    for r in roots {
        match merged.last_mut() {
            Some(last) if r - *last < 0.5 * step => {
                if spec.eval_unchecked(r).slope.abs() < spec.eval_unchecked(*last).slope.abs() {
                    *last = r;
                }
            }
            _ => merged.push(r),
        }
    }
    merged.into_iter().map(|q0| EquilibriumPoint::at(spec, q0)).collect()
}

fn bisect_slope(spec: &PotentialSpec, mut a: f64, mut b: f64, slope_a: f64, tolerance: f64) -> Option<f64> {
    let sign_a = slope_a.signum();
    let mut best = (f64::INFINITY, a);
    for _ in 0..400 {
        let mid = 0.5 * (a + b);
        let s = spec.eval_unchecked(mid).slope;
        if s.abs() < best.0 {
            best = (s.abs(), mid);
        }
        if s.abs() <= tolerance || mid <= a || mid >= b {
            break;
        }
        if s.signum() == sign_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    (best.0 <= tolerance).then_some(best.1)
}

/// Lowest stable equilibrium inside `interval`.
pub fn lowest_minimum(spec: &PotentialSpec, interval: (f64, f64)) -> Result<Option<EquilibriumPoint>> {
    Ok(find_equilibria(spec, interval, DEFAULT_ROOT_TOLERANCE)?
        .into_iter()
        .filter(|p| p.stability == Stability::Minimum)
        .min_by(|a, b| spec.value_unchecked(a.q0).total_cmp(&spec.value_unchecked(b.q0))))
}

/// A search interval wide enough to contain the interesting equilibria of the
/// shipped families.
pub fn default_search_interval(spec: &PotentialSpec) -> (f64, f64) {
    match *spec {
        PotentialSpec::Rotor { .. } => (0.0, TAU),
        PotentialSpec::Pendulum { .. } => (-PI / 2.0, 3.0 * PI / 2.0),
        PotentialSpec::Morse { width, .. } => (-2.0 / width, 10.0 / width),
        PotentialSpec::Harmonic { m, omega } => {
            let s = 10.0 / (m * omega).sqrt();
            (-s, s)
        }
        _ => (-10.0, 10.0),
    }
}
