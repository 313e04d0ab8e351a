//! The infinitesimal Wigner-Moyal transform of the canonical distribution.
//!
//! For `F(q,p) = C e^{−2βH}` with `H = p²/2m + V(q)` the momentum transform
//!
//! ```text
//! ρ(q − δq/2, q + δq/2) = ∫ F(q,p) e^{i p δq/ħ} dp
//! ```
//!
//! has the closed form `C₁ e^{−2βV(q)} e^{−m δq²/(4βħ²)}`. The constant is
//! fixed by `∫ ρ(q, 0) dq = 1` over a finite box.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::{CanonicalEnsemble, PotentialSpec};
use crate::quadrature::{GaussHermite, GaussLegendre};

/// `e^{−2β(V − V_min)}` at the box walls must fall below this.
const WALL_DENSITY: f64 = 1e-12;
const NORMALIZATION_PANELS: usize = 512;
const NORMALIZATION_ORDER: usize = 16;
const MAX_BOX_HALF_WIDTH: f64 = 1e6;

const HERMITE_ORDER: usize = 64;
/// Relative tolerance on the Gauss-Hermite self-convergence estimate.
pub const QUADRATURE_TOLERANCE: f64 = 1e-12;

/// Default trapezoid resolution for the phase-space amplitude check.
pub const FACTORIZATION_POINTS: usize = 4096;

/// Normalized equilibrium density `ρ_eq(q) = e^{−2βV(q)} / Z` on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumDensity {
    beta: f64,
    bounds: (f64, f64),
    /// Energy offset subtracted inside the exponential to avoid overflow.
    shift: f64,
    /// `ln ∫ e^{−2β(V − shift)} dq` over the box.
    log_norm: f64,
}

impl EquilibriumDensity {
    /// Normalize over `bounds`, or over an automatically chosen box when `None`.
    pub fn new(spec: &PotentialSpec, beta: f64, bounds: Option<(f64, f64)>) -> Result<Self> {
        spec.validate()?;
        ensure_positive("beta", beta)?;
        let (q_min, v_min) = spec
            .global_minimum()
            .ok_or_else(|| Error::Normalization(format!("the {} potential is unbounded below", spec.family())))?;
        let bounds = match bounds {
            Some((lo, hi)) => {
                ensure_finite("box", lo)?;
                ensure_finite("box", hi)?;
                if lo >= hi {
                    return Err(Error::InvalidParameter {
                        name: "box",
                        reason: format!("empty box [{lo}, {hi}]"),
                    });
                }
                spec.eval(lo)?;
                spec.eval(hi)?;
                (lo, hi)
            }
            None => auto_box(spec, beta, q_min, v_min)?,
        };
        let (lo, hi) = bounds;
        // the box may not contain the global minimum; shift by the lowest sampled value
        let shift = if (lo..=hi).contains(&q_min) {
            v_min
        } else {
            (0..=256)
                .map(|k| spec.value_unchecked(lo + (hi - lo) * k as f64 / 256.0))
                .fold(f64::INFINITY, f64::min)
        };
        let gl = GaussLegendre::new(NORMALIZATION_ORDER);
        let z = gl.integrate_composite(lo, hi, NORMALIZATION_PANELS, |q| {
            (-2.0 * beta * (spec.value_unchecked(q) - shift)).exp()
        });
        if !(z.is_finite() && z > 0.0) {
            return Err(Error::Normalization(format!(
                "normalization integral {z} over [{lo}, {hi}] is not a positive finite number"
            )));
        }
        Ok(Self {
            beta,
            bounds,
            shift,
            log_norm: z.ln(),
        })
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// `ln Z` for the unshifted density `e^{−2βV}`.
    pub fn log_partition(&self) -> f64 {
        self.log_norm - 2.0 * self.beta * self.shift
    }

    /// `ln ρ_eq` given `V(q)`.
    pub fn log_density_from_value(&self, v: f64) -> f64 {
        -2.0 * self.beta * (v - self.shift) - self.log_norm
    }

    pub fn density(&self, spec: &PotentialSpec, q: f64) -> Result<f64> {
        let v = spec.eval(q)?.value;
        Ok(self.log_density_from_value(v).exp())
    }
}

fn auto_box(spec: &PotentialSpec, beta: f64, q_min: f64, v_min: f64) -> Result<(f64, f64)> {
    match spec {
        PotentialSpec::Rotor { .. } => return Ok((0.0, std::f64::consts::TAU)),
        PotentialSpec::Pendulum { .. } => return Ok((q_min - std::f64::consts::PI, q_min + std::f64::consts::PI)),
        _ => {}
    }
    let threshold = -WALL_DENSITY.ln() / (2.0 * beta);
    let outside = |q: f64| spec.value_unchecked(q) - v_min >= threshold;
    let edge = |direction: f64| -> Result<f64> {
        let mut near = 0.0;
        let mut far = 1e-3;
        while !outside(q_min + direction * far) {
            near = far;
            far *= 2.0;
            if far > MAX_BOX_HALF_WIDTH {
                return Err(Error::Normalization(format!(
                    "e^(-2βV) does not fall below {WALL_DENSITY:e} within |q - q_min| ≤ {MAX_BOX_HALF_WIDTH:e} \
                     (the {} potential is not confining enough at β = {beta})",
                    spec.family()
                )));
            }
        }
        for _ in 0..60 {
            let mid = 0.5 * (near + far);
            if outside(q_min + direction * mid) {
                far = mid;
            } else {
                near = mid;
            }
        }
        Ok(q_min + direction * far)
    };
    Ok((edge(-1.0)?, edge(1.0)?))
}

/// One evaluation of `ρ(q − δq/2, q + δq/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicSample {
    pub q: f64,
    pub delta_q: f64,
    pub value: Complex64,
    /// `|δq| ≤ 0.2 √(βħ²/m)`, the range where second-order expansions hold.
    pub infinitesimal: bool,
}

/// Which second term the characteristic-function PDE uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PdeForm {
    /// `−Σ (ħ²/m) ∂²ρ/∂q∂δq + Σ V'(q) δq ρ`
    #[default]
    Corrected,
    /// `−Σ (ħ²/m) ∂²ρ/∂q∂δq + Σ (∂ρ/∂q) δq ρ`, kept for comparison; the closed
    /// form does not solve it.
    AsPrinted,
}

/// The characteristic function of one canonical ensemble in one potential.
#[derive(Debug, Clone)]
pub struct CharacteristicFunction {
    spec: PotentialSpec,
    ens: CanonicalEnsemble,
    density: EquilibriumDensity,
    hermite: GaussHermite,
    hermite_fine: GaussHermite,
}

impl CharacteristicFunction {
    pub fn new(ens: &CanonicalEnsemble, spec: &PotentialSpec) -> Result<Self> {
        Self::with_box(ens, spec, None)
    }

    pub fn with_box(ens: &CanonicalEnsemble, spec: &PotentialSpec, bounds: Option<(f64, f64)>) -> Result<Self> {
        ens.validate_for(&[spec.mass()])?;
        let density = EquilibriumDensity::new(spec, ens.beta, bounds)?;
        Ok(Self {
            spec: spec.clone(),
            ens: ens.clone(),
            density,
            hermite: GaussHermite::new(HERMITE_ORDER),
            hermite_fine: GaussHermite::new(2 * HERMITE_ORDER),
        })
    }

    pub fn density(&self) -> &EquilibriumDensity {
        &self.density
    }

    fn sample(&self, q: f64, delta_q: f64, value: Complex64) -> CharacteristicSample {
        CharacteristicSample {
            q,
            delta_q,
            value,
            infinitesimal: delta_q.abs() <= self.ens.infinitesimal_bound(self.spec.mass()),
        }
    }

    /// Width exponent `m/(4βħ²)` of the Gaussian factor in `δq`.
    fn gaussian_rate(&self) -> f64 {
        self.spec.mass() / (4.0 * self.ens.beta * self.ens.hbar * self.ens.hbar)
    }

    /// `C₁ e^{−2βV(q)} e^{−m δq²/(4βħ²)}`.
    pub fn closed_form(&self, q: f64, delta_q: f64) -> Result<CharacteristicSample> {
        ensure_finite("delta_q", delta_q)?;
        let v = self.spec.eval(q)?.value;
        let log = self.density.log_density_from_value(v) - self.gaussian_rate() * delta_q * delta_q;
        Ok(self.sample(q, delta_q, Complex64::new(log.exp(), 0.0)))
    }

    /// Direct momentum integral of `F(q,p) e^{i p δq/ħ}` by Gauss-Hermite
    /// quadrature matched to `e^{−βp²/m}`.
    pub fn quadrature(&self, q: f64, delta_q: f64) -> Result<CharacteristicSample> {
        ensure_finite("delta_q", delta_q)?;
        let v = self.spec.eval(q)?.value;
        let m = self.spec.mass();
        let beta = self.ens.beta;
        // p = x √(m/β) maps e^{−βp²/m} onto the Hermite weight e^{−x²}
        let p_scale = (m / beta).sqrt();
        let configuration = self.density.log_density_from_value(v).exp();
        // F(q,p) = ρ_eq(q) √(β/(πm)) e^{−βp²/m}
        let momentum_norm = (beta / (std::f64::consts::PI * m)).sqrt();
        let transform = |rule: &GaussHermite| -> Complex64 {
            rule.nodes
                .iter()
                .zip(&rule.weights)
                .map(|(&x, &w)| {
                    let p = x * p_scale;
                    Complex64::from_polar(w, p * delta_q / self.ens.hbar)
                })
                .sum::<Complex64>()
                * (p_scale * momentum_norm * configuration)
        };
        let coarse = transform(&self.hermite);
        let fine = transform(&self.hermite_fine);
        let estimate = (fine - coarse).norm();
        let tolerance = QUADRATURE_TOLERANCE * fine.norm().max(f64::MIN_POSITIVE);
        if estimate > tolerance {
            return Err(Error::Accuracy { estimate, tolerance });
        }
        Ok(self.sample(q, delta_q, fine))
    }

    /// Residual of the stationary characteristic-function PDE evaluated on the
    /// closed form with analytic derivatives.
    pub fn pde_residual(&self, q: f64, delta_q: f64, form: PdeForm) -> Result<f64> {
        let eval = self.spec.eval(q)?;
        let rho = self.closed_form(q, delta_q)?.value.re;
        let m = self.spec.mass();
        let hbar = self.ens.hbar;
        // ln ρ separates in q and δq, so ∂²ρ/∂q∂δq = ρ ∂_q ln ρ ∂_δq ln ρ
        let d_q_log = -2.0 * self.ens.beta * eval.slope;
        let d_dq_log = -2.0 * self.gaussian_rate() * delta_q;
        let mixed = rho * d_q_log * d_dq_log;
        let second = match form {
            PdeForm::Corrected => eval.slope * delta_q * rho,
            PdeForm::AsPrinted => (rho * d_q_log) * delta_q * rho,
        };
        Ok(-(hbar * hbar / m) * mixed + second)
    }

    /// `C₃ e^{−2β[V + δq² V''/8]}`, the characteristic function assembled
    /// from the amplitudes `ψ = √C₃ e^{−βV}` to second order in `δq`.
    pub fn product_form(&self, q: f64, delta_q: f64) -> Result<CharacteristicSample> {
        ensure_finite("delta_q", delta_q)?;
        let eval = self.spec.eval(q)?;
        let log = self.density.log_density_from_value(eval.value)
            - 2.0 * self.ens.beta * (delta_q * delta_q * eval.curvature / 8.0);
        Ok(self.sample(q, delta_q, Complex64::new(log.exp(), 0.0)))
    }
}

pub fn characteristic_closed_form(
    ens: &CanonicalEnsemble,
    spec: &PotentialSpec,
    q: f64,
    delta_q: f64,
) -> Result<CharacteristicSample> {
    CharacteristicFunction::new(ens, spec)?.closed_form(q, delta_q)
}

pub fn characteristic_quadrature(
    ens: &CanonicalEnsemble,
    spec: &PotentialSpec,
    q: f64,
    delta_q: f64,
) -> Result<CharacteristicSample> {
    CharacteristicFunction::new(ens, spec)?.quadrature(q, delta_q)
}

pub fn pde_residual(ens: &CanonicalEnsemble, spec: &PotentialSpec, q: f64, delta_q: f64) -> Result<f64> {
    CharacteristicFunction::new(ens, spec)?.pde_residual(q, delta_q, PdeForm::Corrected)
}

pub fn product_form_characteristic(
    ens: &CanonicalEnsemble,
    spec: &PotentialSpec,
    q: f64,
    delta_q: f64,
) -> Result<CharacteristicSample> {
    CharacteristicFunction::new(ens, spec)?.product_form(q, delta_q)
}

/// Position factor `g(q)` of a product amplitude `φ(q,p) = g(q) h(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PositionProfile {
    /// `e^{−q²/(2w²)}`
    Gaussian { width: f64 },
}

/// Momentum factor `h(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentumProfile {
    /// `e^{−p²/(2σ²)}`
    Gaussian { sigma: f64 },
    /// `e^{−(p−a)²/(2σ²)} + e^{−(p+a)²/(2σ²)}`
    Mixture { sigma: f64, offset: f64 },
}

impl PositionProfile {
    pub fn eval(&self, q: f64) -> f64 {
        match *self {
            Self::Gaussian { width } => (-q * q / (2.0 * width * width)).exp(),
        }
    }
}

impl MomentumProfile {
    pub fn eval(&self, p: f64) -> f64 {
        let g = |x: f64, s: f64| (-x * x / (2.0 * s * s)).exp();
        match *self {
            Self::Gaussian { sigma } => g(p, sigma),
            Self::Mixture { sigma, offset } => g(p - offset, sigma) + g(p + offset, sigma),
        }
    }

    /// Half-width of a window outside which `h` is below `e^{−72}`.
    pub fn window(&self) -> f64 {
        match *self {
            Self::Gaussian { sigma } => 12.0 * sigma,
            Self::Mixture { sigma, offset } => offset.abs() + 12.0 * sigma,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Self::Gaussian { sigma } => ensure_positive("sigma", sigma),
            Self::Mixture { sigma, offset } => {
                ensure_positive("sigma", sigma)?;
                ensure_finite("offset", offset)
            }
        }
    }
}

/// A separable phase-space amplitude `φ(q,p) = g(q) h(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpaceAmplitudeSpec {
    pub position: PositionProfile,
    pub momentum: MomentumProfile,
}

impl PhaseSpaceAmplitudeSpec {
    pub fn gaussian(width: f64, sigma: f64) -> Self {
        Self {
            position: PositionProfile::Gaussian { width },
            momentum: MomentumProfile::Gaussian { sigma },
        }
    }

    pub fn phi(&self, q: f64, p: f64) -> f64 {
        self.position.eval(q) * self.momentum.eval(p)
    }

    fn validate(&self) -> Result<()> {
        match self.position {
            PositionProfile::Gaussian { width } => ensure_positive("width", width)?,
        }
        self.momentum.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorizationCheck {
    /// `∫ e^{ipδq/ħ} ∫ φ†(q, 2p−p') φ(q, p') dp' dp`
    pub lhs: Complex64,
    /// `ψ†(q − δq/2) ψ(q + δq/2)` from the half-displacement transforms.
    pub rhs: Complex64,
    pub ratio: Complex64,
}

/// Compare the characteristic function built from `F = ∫ φ†(q,2p−p')φ(q,p') dp'`
/// against the product of the half-displacement transforms of `φ`.
///
/// Both sides use the trapezoid rule with `points` nodes on the momentum
/// window; the inner convolution reuses the same grid, since `2p_i − p_j`
/// lands on grid index `2i − j`.
pub fn amplitude_factorization_check(
    amp: &PhaseSpaceAmplitudeSpec,
    ens: &CanonicalEnsemble,
    q: f64,
    delta_q: f64,
) -> Result<FactorizationCheck> {
    amplitude_factorization_check_with(amp, ens, q, delta_q, FACTORIZATION_POINTS)
}

pub fn amplitude_factorization_check_with(
    amp: &PhaseSpaceAmplitudeSpec,
    ens: &CanonicalEnsemble,
    q: f64,
    delta_q: f64,
    points: usize,
) -> Result<FactorizationCheck> {
    amp.validate()?;
    ens.validate()?;
    ensure_finite("q", q)?;
    ensure_finite("delta_q", delta_q)?;
    if points < 16 {
        return Err(Error::InvalidParameter {
            name: "points",
            reason: format!("need at least 16 quadrature points, got {points}"),
        });
    }
    let window = amp.momentum.window();
    let n = points;
    let step = 2.0 * window / (n - 1) as f64;
    let p_at = |index: isize| -window + index as f64 * step;
    let g = amp.position.eval(q);
    let g_sq = g * g;

    // h on grid indices -(n-1) ..= 2(n-1)
    let offset = (n - 1) as isize;
    let h_ext: Vec<f64> = (-offset..=2 * offset).map(|k| amp.momentum.eval(p_at(k))).collect();
    let h = |index: isize| h_ext[(index + offset) as usize];

    let k = delta_q / ens.hbar;
    let weight = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };

    let mut lhs = Complex64::new(0.0, 0.0);
    let mut tail = 0.0_f64;
    for i in 0..n {
        let two_i = 2 * i as isize;
        let conv: f64 = (0..n).map(|j| weight(j) * h(two_i - j as isize) * h(j as isize)).sum::<f64>() * step;
        let f_qp = g_sq * conv;
        if i == 0 || i == n - 1 {
            tail = tail.max(f_qp.abs());
        }
        lhs += Complex64::from_polar(weight(i) * f_qp, p_at(i as isize) * k);
    }
    lhs *= step;

    let half_transform: Complex64 = (0..n)
        .map(|i| Complex64::from_polar(weight(i) * g * h(i as isize), 0.5 * p_at(i as isize) * k))
        .sum::<Complex64>()
        * step;
    // ψ(q + δq/2) and ψ†(q − δq/2) share the kernel e^{ipδq/(2ħ)}; φ is real
    let rhs = half_transform * half_transform;

    let scale = lhs.norm().max(f64::MIN_POSITIVE);
    if tail > 1e-14 * scale {
        return Err(Error::Accuracy {
            estimate: tail / scale,
            tolerance: 1e-14,
        });
    }
    Ok(FactorizationCheck { lhs, rhs, ratio: lhs / rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn unit() -> (CanonicalEnsemble, PotentialSpec) {
        (CanonicalEnsemble::natural(1.0), PotentialSpec::harmonic(1.0, 1.0))
    }

    #[test]
    fn harmonic_peak_value() {
        let (ens, spec) = unit();
        let s = characteristic_closed_form(&ens, &spec, 0.0, 0.0).unwrap();
        assert_relative_eq!(s.value.re, 1.0 / PI.sqrt(), max_relative = 1e-12);
        assert_eq!(s.value.im, 0.0);
    }

    #[test]
    fn harmonic_displaced_value() {
        let (ens, spec) = unit();
        let s = characteristic_closed_form(&ens, &spec, 0.0, 0.1).unwrap();
        assert_relative_eq!(s.value.re, (-0.0025f64).exp() / PI.sqrt(), max_relative = 1e-12);
        assert!(s.infinitesimal);
    }

    #[test]
    fn zero_displacement_is_equilibrium_density() {
        let spec = PotentialSpec::quartic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(0.7);
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        for q in [-1.0, 0.0, 0.4] {
            let rho = cf.density().density(&spec, q).unwrap();
            assert_relative_eq!(cf.closed_form(q, 0.0).unwrap().value.re, rho, max_relative = 1e-15);
            assert_relative_eq!(cf.quadrature(q, 0.0).unwrap().value.re, rho, max_relative = 1e-13);
            assert_relative_eq!(cf.product_form(q, 0.0).unwrap().value.re, rho, max_relative = 1e-15);
        }
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let (ens, spec) = unit();
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let a = cf.quadrature(0.5, 0.05).unwrap();
        let b = cf.closed_form(0.5, 0.05).unwrap();
        assert_relative_eq!(a.value.re, b.value.re, max_relative = 1e-8);
        assert!(a.value.im.abs() <= 1e-10);
    }

    #[test]
    fn quadrature_conjugation_symmetry() {
        let (ens, spec) = unit();
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let a = cf.quadrature(0.3, 0.17).unwrap().value;
        let b = cf.quadrature(0.3, -0.17).unwrap().value;
        assert_relative_eq!(a.re, b.re, max_relative = 1e-14);
        assert_relative_eq!(a.im, -b.im, epsilon = 1e-16);
    }

    #[test]
    fn quadrature_reports_non_convergence() {
        let (ens, spec) = unit();
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let err = cf.quadrature(0.0, 40.0).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }), "{err:?}");
    }

    #[test]
    fn normalization_integrates_to_one() {
        // independent check with a plain trapezoid over the same box
        let spec = PotentialSpec::morse(1.0, 30.0, 1.0);
        let d = EquilibriumDensity::new(&spec, 1.0, None).unwrap();
        let (lo, hi) = d.bounds();
        let total = crate::quadrature::trapezoid(lo, hi, 200_001, |q| d.density(&spec, q).unwrap());
        assert_relative_eq!(total, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn unbounded_potentials_are_not_normalizable() {
        let ens = CanonicalEnsemble::natural(1.0);
        let cubic = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.0, 1.0]);
        assert!(matches!(CharacteristicFunction::new(&ens, &cubic), Err(Error::Normalization(_))));
        let shallow = PotentialSpec::morse(1.0, 1.0, 1.0);
        assert!(matches!(CharacteristicFunction::new(&ens, &shallow), Err(Error::Normalization(_))));
        assert!(matches!(
            CharacteristicFunction::new(&ens, &PotentialSpec::free(1.0)),
            Err(Error::Normalization(_))
        ));
        // an explicit box makes the shallow well normalizable
        assert!(CharacteristicFunction::with_box(&ens, &shallow, Some((-2.0, 8.0))).is_ok());
    }

    #[test]
    fn pde_residual_vanishes_for_corrected_form() {
        let ens = CanonicalEnsemble::natural(1.0);
        for (spec, q) in [(PotentialSpec::harmonic(1.0, 1.0), 0.3), (PotentialSpec::quartic(1.0, 1.0), 1.0)] {
            let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
            let rho = cf.closed_form(q, 0.01).unwrap().value.re;
            let r = cf.pde_residual(q, 0.01, PdeForm::Corrected).unwrap();
            assert!(r.abs() <= 1e-12 * rho, "{r}");
            assert_eq!(cf.pde_residual(q, 0.0, PdeForm::Corrected).unwrap(), 0.0);
        }
    }

    #[test]
    fn printed_pde_form_is_not_solved() {
        let (ens, spec) = unit();
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let rho = cf.closed_form(0.3, 0.01).unwrap().value.re;
        let r = cf.pde_residual(0.3, 0.01, PdeForm::AsPrinted).unwrap();
        assert!(r.abs() > 1e-6 * rho);
    }

    #[test]
    fn mixed_derivative_agrees_with_finite_differences() {
        // central differences of the closed form in (q, δq)
        let spec = PotentialSpec::quartic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(0.8);
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let (q, dq) = (0.7, 0.05);
        let h = 1e-4;
        let f = |a: f64, b: f64| cf.closed_form(a, b).unwrap().value.re;
        let mixed_fd = (f(q + h, dq + h) - f(q + h, dq - h) - f(q - h, dq + h) + f(q - h, dq - h)) / (4.0 * h * h);
        let v1 = spec.eval(q).unwrap().slope;
        // corrected PDE: (ħ²/m) ρ_{q,δq} = V' δq ρ
        assert_relative_eq!(mixed_fd, v1 * dq * f(q, dq), max_relative = 1e-6);
    }

    #[test]
    fn product_form_matched_harmonic() {
        let (ens, spec) = unit();
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        for (q, dq) in [(0.0, 0.01), (0.8, -0.004), (-1.5, 0.0099)] {
            let a = cf.product_form(q, dq).unwrap().value.re;
            let b = cf.closed_form(q, dq).unwrap().value.re;
            assert_relative_eq!(a, b, max_relative = 1e-8);
        }
    }

    #[test]
    fn product_form_mismatch_is_second_order() {
        let ens = CanonicalEnsemble::natural(2.0);
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let cf = CharacteristicFunction::new(&ens, &spec).unwrap();
        let gap = |dq: f64| {
            let a = cf.product_form(0.2, dq).unwrap().value.re;
            let b = cf.closed_form(0.2, dq).unwrap().value.re;
            ((a - b) / b).abs()
        };
        let ratio = gap(2e-3) / gap(1e-3);
        assert!((ratio - 4.0).abs() <= 0.2, "{ratio}");
    }

    #[test]
    fn factorization_ratio_is_half_and_constant() {
        let ens = CanonicalEnsemble::natural(1.0);
        let amp = PhaseSpaceAmplitudeSpec::gaussian(1.0, 1.0);
        let base = amplitude_factorization_check_with(&amp, &ens, 0.3, 0.0, 1024).unwrap().ratio;
        assert_relative_eq!(base.re, 0.5, max_relative = 1e-10);
        for dq in [0.05, 0.1, 0.2] {
            let r = amplitude_factorization_check_with(&amp, &ens, 0.3, dq, 1024).unwrap().ratio;
            assert!((r - base).norm() <= 1e-8 * base.norm());
        }
    }

    #[test]
    fn factorization_rejects_degenerate_profile() {
        let ens = CanonicalEnsemble::natural(1.0);
        let amp = PhaseSpaceAmplitudeSpec {
            position: PositionProfile::Gaussian { width: 1.0 },
            momentum: MomentumProfile::Gaussian { sigma: 0.0 },
        };
        assert!(amplitude_factorization_check(&amp, &ens, 0.0, 0.1).is_err());
    }
}
