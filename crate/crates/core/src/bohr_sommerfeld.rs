//! Action integrals over one classical period and the integer / half-integer
//! quantization rule.
//!
//! Librations (two turning points) quantize as `J = (n + ½) h`, rotations on a
//! periodic coordinate as `J = n h`, with `h = 2πħ`.

use std::f64::consts::{PI, TAU};
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::PotentialSpec;
use crate::oracle::{fd_eigensolve, Boundary, OracleOptions};
use crate::quadrature::GaussLegendre;

/// Default Gauss-Legendre order for the action and period integrals.
pub const DEFAULT_ORDER: usize = 128;
/// Energies this close to the top of a periodic potential are rejected.
pub const SEPARATRIX_TOLERANCE: f64 = 1e-9;
/// Root tolerance on the action, in units of `h = 2πħ`.
pub const ACTION_TOLERANCE: f64 = 1e-10;
/// Relative disagreement allowed between the order-`n` and order-`n/2` rules.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

const MARCH_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionKind {
    Libration,
    Rotation,
}

impl std::str::FromStr for MotionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "libration" => Ok(Self::Libration),
            "rotation" => Ok(Self::Rotation),
            other => Err(Error::InvalidParameter {
                name: "class",
                reason: format!("expected libration or rotation, got {other:?}"),
            }),
        }
    }
}

/// How an orbit at a given energy moves.
///
/// `period_length` is the coordinate period for rotations and the distance
/// between the turning points for librations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionClass {
    pub kind: MotionKind,
    pub period_length: f64,
    pub turning_points: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub energy: f64,
    pub action: f64,
    /// `dJ/dE`, evaluated as the classical period.
    pub d_action_d_energy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumLevel {
    pub n: u32,
    pub target_action: f64,
    pub e_bs: f64,
    pub e_oracle: Option<f64>,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub class: MotionKind,
    pub hbar: f64,
    pub levels: Vec<SpectrumLevel>,
}

/// Positive branch of `p(q)` on the energy shell `H(q, p) = E`.
pub fn on_shell_momentum(spec: &PotentialSpec, energy: f64, q: f64) -> Result<f64> {
    spec.validate()?;
    ensure_finite("energy", energy)?;
    let v = spec.eval(q)?.value;
    if energy < v {
        return Err(Error::ClassicallyForbidden {
            q,
            energy,
            potential: v,
        });
    }
    Ok((2.0 * spec.mass() * (energy - v)).sqrt())
}

fn minimum(spec: &PotentialSpec) -> Result<(f64, f64)> {
    spec.global_minimum()
        .ok_or_else(|| Error::Unsupported(format!("the {} potential is unbounded below", spec.family())))
}

/// Turning points `a < b` of the well around the global minimum, or `None`
/// when the energy lies above every barrier of a periodic potential.
pub fn turning_points(spec: &PotentialSpec, energy: f64) -> Result<Option<(f64, f64)>> {
    spec.validate()?;
    ensure_finite("energy", energy)?;
    let (q_min, v_min) = minimum(spec)?;
    if energy < v_min {
        return Err(Error::NoClassicalMotion { energy, v_min });
    }
    if let Some(v_max) = spec.max_over_period() {
        if energy > v_max || v_max == v_min {
            return Ok(None);
        }
    }
    if energy == v_min {
        return Ok(Some((q_min, q_min)));
    }
    let a = march(spec, q_min, energy, -1.0)?;
    let b = march(spec, q_min, energy, 1.0)?;
    Ok(Some((a, b)))
}

fn march(spec: &PotentialSpec, q_min: f64, energy: f64, dir: f64) -> Result<f64> {
    let v = |q: f64| spec.value_unchecked(q);
    let scale = q_min.abs().max(1.0);
    // periodic wells end at the barrier half a period away
    let reach = spec.period().map_or(MARCH_LIMIT * scale, |p| 0.5 * p);
    let mut step = 1e-6 * scale;
    let mut near = q_min;
    let mut far = q_min + dir * step;
    while v(far) < energy {
        near = far;
        step *= 1.02;
        far += dir * step;
        if (far - q_min).abs() >= reach {
            far = q_min + dir * reach;
            if v(far) < energy {
                return Err(Error::Unbounded { energy });
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (near + far);
        if mid == near || mid == far {
            break;
        }
        if v(mid) < energy {
            near = mid;
        } else {
            far = mid;
        }
    }
    // the point where V is closest to E
    Ok(if (v(near) - energy).abs() < (v(far) - energy).abs() { near } else { far })
}

/// Classify the orbit at `energy`: libration if it has turning points,
/// rotation if it clears every barrier of a periodic potential.
pub fn classify_motion(spec: &PotentialSpec, energy: f64) -> Result<MotionClass> {
    spec.validate()?;
    ensure_finite("energy", energy)?;
    let (_, v_min) = minimum(spec)?;
    if energy < v_min {
        return Err(Error::NoClassicalMotion { energy, v_min });
    }
    if let (Some(period), Some(v_max)) = (spec.period(), spec.max_over_period()) {
        if v_max > v_min && (energy - v_max).abs() <= SEPARATRIX_TOLERANCE * v_max.abs().max(1.0) {
            return Err(Error::Separatrix { energy, v_max });
        }
        if energy > v_max || v_max == v_min {
            return Ok(MotionClass {
                kind: MotionKind::Rotation,
                period_length: period,
                turning_points: None,
            });
        }
    }
    let (a, b) = turning_points(spec, energy)?.expect("libration energy has turning points");
    Ok(MotionClass {
        kind: MotionKind::Libration,
        period_length: b - a,
        turning_points: Some((a, b)),
    })
}

/// Gauss-Legendre evaluation of `J(E)` and `τ(E)` with an embedded
/// half-order error estimate.
struct ActionRule {
    full: GaussLegendre,
    half: GaussLegendre,
}

impl ActionRule {
    fn new(order: usize) -> Result<Self> {
        if order < 8 {
            return Err(Error::InvalidParameter {
                name: "order",
                reason: format!("quadrature order must be at least 8, got {order}"),
            });
        }
        Ok(Self {
            full: GaussLegendre::new(order),
            half: GaussLegendre::new(order / 2),
        })
    }

    fn checked<F: Fn(&GaussLegendre) -> f64>(&self, f: F) -> Result<f64> {
        let fine = f(&self.full);
        let coarse = f(&self.half);
        let estimate = (fine - coarse).abs();
        let tolerance = QUADRATURE_TOLERANCE * fine.abs().max(f64::MIN_POSITIVE);
        if estimate > tolerance {
            return Err(Error::Accuracy { estimate, tolerance });
        }
        Ok(fine)
    }

    fn action(&self, spec: &PotentialSpec, energy: f64, class: &MotionClass) -> Result<f64> {
        let m = spec.mass();
        let p = |q: f64| (2.0 * m * (energy - spec.value_unchecked(q)).max(0.0)).sqrt();
        match class.kind {
            MotionKind::Libration => {
                let (a, b) = libration_points(class)?;
                if b <= a {
                    return Ok(0.0);
                }
                let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                self.checked(|rule| 2.0 * rule.integrate(0.0, PI, |t| p(c + h * t.cos()) * h * t.sin()))
            }
            MotionKind::Rotation => {
                let (lo, hi) = rotation_window(spec, class);
                self.checked(|rule| rule.integrate(lo, hi, p))
            }
        }
    }

    fn period(&self, spec: &PotentialSpec, energy: f64, class: &MotionClass) -> Result<f64> {
        let m = spec.mass();
        let inv_v = |q: f64| m / (2.0 * m * (energy - spec.value_unchecked(q))).sqrt();
        match class.kind {
            MotionKind::Libration => {
                let (a, b) = libration_points(class)?;
                if b <= a {
                    return Err(Error::NoClassicalMotion { energy, v_min: energy });
                }
                let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
                self.checked(|rule| 2.0 * rule.integrate(0.0, PI, |t| inv_v(c + h * t.cos()) * h * t.sin()))
            }
            MotionKind::Rotation => {
                let (lo, hi) = rotation_window(spec, class);
                self.checked(|rule| rule.integrate(lo, hi, inv_v))
            }
        }
    }
}

/// One coordinate period centred on the minimum, so that the barrier top
/// (where `p` has a kink near the separatrix) sits at the endpoints.
fn rotation_window(spec: &PotentialSpec, class: &MotionClass) -> (f64, f64) {
    let centre = spec.global_minimum().map_or(0.0, |m| m.0);
    let half = 0.5 * class.period_length;
    (centre - half, centre + half)
}

fn libration_points(class: &MotionClass) -> Result<(f64, f64)> {
    class
        .turning_points
        .ok_or_else(|| Error::MotionClass("a libration needs turning points".into()))
}

/// `J(E) = ∮ p dq` over one period of the orbit described by `class`.
pub fn action(spec: &PotentialSpec, energy: f64, class: &MotionClass) -> Result<ActionProfile> {
    action_with_order(spec, energy, class, DEFAULT_ORDER)
}

pub fn action_with_order(spec: &PotentialSpec, energy: f64, class: &MotionClass, order: usize) -> Result<ActionProfile> {
    spec.validate()?;
    ensure_finite("energy", energy)?;
    let rule = ActionRule::new(order)?;
    let j = rule.action(spec, energy, class)?;
    let tau = if j > 0.0 { rule.period(spec, energy, class).ok() } else { None };
    Ok(ActionProfile {
        energy,
        action: j,
        d_action_d_energy: tau,
    })
}

/// Classical period `τ(E) = ∮ m/p dq`, which equals `dJ/dE`.
pub fn classical_period(spec: &PotentialSpec, energy: f64, class: &MotionClass) -> Result<f64> {
    spec.validate()?;
    ensure_finite("energy", energy)?;
    ActionRule::new(DEFAULT_ORDER)?.period(spec, energy, class)
}

/// Options for [`quantize_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizeOptions {
    /// Force a motion class; `None` picks rotation for the rotor and
    /// libration otherwise.
    pub class: Option<MotionKind>,
    pub order: usize,
    /// Attach finite-difference eigenvalues.
    pub oracle: Option<OracleOptions>,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        Self {
            class: None,
            order: DEFAULT_ORDER,
            oracle: None,
        }
    }
}

/// Bohr-Sommerfeld energies for the quantum numbers in `levels`.
pub fn quantize(
    spec: &PotentialSpec,
    class: Option<MotionKind>,
    levels: RangeInclusive<u32>,
    hbar: f64,
) -> Result<SpectrumResult> {
    quantize_with(
        spec,
        levels,
        hbar,
        &QuantizeOptions {
            class,
            ..QuantizeOptions::default()
        },
    )
}

pub fn quantize_with(
    spec: &PotentialSpec,
    levels: RangeInclusive<u32>,
    hbar: f64,
    options: &QuantizeOptions,
) -> Result<SpectrumResult> {
    spec.validate()?;
    ensure_positive("hbar", hbar)?;
    if levels.is_empty() {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: "empty level range".into(),
        });
    }
    let kind = options.class.unwrap_or(match spec {
        PotentialSpec::Rotor { .. } => MotionKind::Rotation,
        _ => MotionKind::Libration,
    });
    let rule = ActionRule::new(options.order)?;
    let (_, v_min) = minimum(spec)?;
    let h = TAU * hbar;

    let class_at = |energy: f64| -> Result<MotionClass> {
        match kind {
            MotionKind::Libration => {
                let points = turning_points(spec, energy)?
                    .ok_or_else(|| Error::MotionClass(format!("E = {energy} is a rotation, not a libration")))?;
                Ok(MotionClass {
                    kind,
                    period_length: points.1 - points.0,
                    turning_points: Some(points),
                })
            }
            MotionKind::Rotation => {
                let period = spec
                    .period()
                    .ok_or_else(|| Error::MotionClass(format!("the {} coordinate is not periodic", spec.family())))?;
                Ok(MotionClass {
                    kind,
                    period_length: period,
                    turning_points: None,
                })
            }
        }
    };
    let j = |energy: f64| -> Result<f64> { rule.action(spec, energy, &class_at(energy)?) };

    // bracket limits: rotations start above the barrier, librations stay below it
    let barrier = spec.max_over_period().filter(|&v_max| v_max > v_min);
    let (bottom, ceiling) = match kind {
        MotionKind::Libration => {
            let ceiling = barrier.or(spec.dissociation_energy()).map(|top| top - SEPARATRIX_TOLERANCE * top.abs().max(1.0));
            (v_min, ceiling)
        }
        MotionKind::Rotation => {
            let bottom = barrier.map_or(v_min, |top| top + 2.0 * SEPARATRIX_TOLERANCE * top.abs().max(1.0));
            (bottom, None)
        }
    };
    let j_bottom = j(bottom)?;
    let targets: Vec<(u32, f64)> = levels
        .clone()
        .map(|n| {
            let quanta = match kind {
                MotionKind::Libration => n as f64 + 0.5,
                MotionKind::Rotation => n as f64,
            };
            (n, quanta * h)
        })
        .collect();
    let highest = targets.last().expect("non-empty range").1;

    let mut step = hbar * hbar / spec.mass();
    let mut top = bottom + step;
    let mut j_top = j(ceiling.map_or(top, |c| top.min(c)))?;
    while j_top < highest {
        if let Some(c) = ceiling {
            if top >= c {
                let &(n, target) = targets.iter().find(|t| t.1 > j_top).expect("some target unreached");
                return Err(Error::BracketExhausted { n: n as i64, target });
            }
        }
        step *= 2.0;
        top = bottom + step;
        if !top.is_finite() || step > 1e300 {
            return Err(Error::BracketExhausted {
                n: *levels.end() as i64,
                target: highest,
            });
        }
        j_top = j(ceiling.map_or(top, |c| top.min(c)))?;
    }
    let top = ceiling.map_or(top, |c| top.min(c));

    // sampled monotonicity of J on the bracket
    let samples = 32;
    let mut previous = j_bottom;
    for i in 1..=samples {
        let e = bottom + (top - bottom) * i as f64 / samples as f64;
        let value = j(e)?;
        if value <= previous {
            return Err(Error::NonMonotoneAction { energy: e });
        }
        previous = value;
    }

    let tolerance = ACTION_TOLERANCE * h;
    let mut rows = Vec::with_capacity(targets.len());
    for &(n, target) in &targets {
        if target < j_bottom - tolerance {
            return Err(Error::BracketExhausted { n: n as i64, target });
        }
        let (mut lo, mut hi) = (bottom, top);
        let mut e_bs = if (j_bottom - target).abs() <= tolerance { bottom } else { 0.5 * (lo + hi) };
        if e_bs != bottom {
            for _ in 0..300 {
                e_bs = 0.5 * (lo + hi);
                let value = j(e_bs)?;
                if (value - target).abs() <= tolerance || e_bs == lo || e_bs == hi {
                    break;
                }
                if value < target {
                    lo = e_bs;
                } else {
                    hi = e_bs;
                }
            }
        }
        rows.push(SpectrumLevel {
            n,
            target_action: target,
            e_bs,
            e_oracle: None,
            relative_error: None,
        });
    }

    if let Some(oracle_options) = &options.oracle {
        attach_oracle(spec, kind, hbar, oracle_options, &mut rows)?;
    }
    Ok(SpectrumResult {
        class: kind,
        hbar,
        levels: rows,
    })
}

/// Index of the finite-difference eigenvalue paired with quantum number `n`:
/// rotations pair `n ≥ 1` with the first member of each `±n` doublet.
pub fn oracle_index(kind: MotionKind, n: u32) -> usize {
    match kind {
        MotionKind::Libration => n as usize,
        MotionKind::Rotation if n == 0 => 0,
        MotionKind::Rotation => 2 * n as usize - 1,
    }
}

fn attach_oracle(
    spec: &PotentialSpec,
    kind: MotionKind,
    hbar: f64,
    options: &OracleOptions,
    rows: &mut [SpectrumLevel],
) -> Result<()> {
    let boundary = if spec.period().is_some() { Boundary::Periodic } else { Boundary::Dirichlet };
    let highest = rows.iter().map(|r| oracle_index(kind, r.n)).max().unwrap_or(0);
    // high levels may need a finer grid than the default
    let mut options = options.clone();
    let solution = loop {
        match fd_eigensolve(spec, hbar, None, highest + 1, boundary, &options) {
            Err(Error::Resolution { .. }) if options.grid_points < 8 * OracleOptions::default().grid_points => {
                options.grid_points *= 2;
            }
            other => break other?,
        }
    };
    let floor = hbar * hbar / (2.0 * spec.mass());
    for row in rows {
        let e = solution.eigenvalues[oracle_index(kind, row.n)];
        row.e_oracle = Some(e);
        row.relative_error = Some((row.e_bs - e).abs() / e.abs().max(floor));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn momentum_on_shell() {
        let ho = PotentialSpec::harmonic(1.0, 1.0);
        assert_relative_eq!(on_shell_momentum(&ho, 0.5, 0.0).unwrap(), 1.0);
        assert_eq!(on_shell_momentum(&ho, 0.5, 1.0).unwrap(), 0.0);
        assert_relative_eq!(on_shell_momentum(&PotentialSpec::rotor(1.0), 2.0, 1.3).unwrap(), 2.0);
        assert!(matches!(on_shell_momentum(&ho, 0.5, 2.0), Err(Error::ClassicallyForbidden { .. })));
    }

    #[test]
    fn turning_points_of_simple_wells() {
        let (a, b) = turning_points(&PotentialSpec::harmonic(1.0, 1.0), 0.5).unwrap().unwrap();
        assert_relative_eq!(a, -1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        let quartic = PotentialSpec::quartic(1.0, 1.0);
        let (a, b) = turning_points(&quartic, 0.25).unwrap().unwrap();
        assert_relative_eq!(a, -1.0, epsilon = 1e-12);
        assert_relative_eq!(b, 1.0, epsilon = 1e-12);
        assert!((quartic.eval(b).unwrap().value - 0.25).abs() <= 1e-12);
        assert_eq!(turning_points(&PotentialSpec::rotor(1.0), 1.0).unwrap(), None);
        assert!(matches!(
            turning_points(&PotentialSpec::harmonic(1.0, 1.0), -0.1),
            Err(Error::NoClassicalMotion { .. })
        ));
        assert!(matches!(turning_points(&PotentialSpec::morse(1.0, 2.0, 1.0), 2.5), Err(Error::Unbounded { .. })));
    }

    #[test]
    fn classification() {
        let pendulum = PotentialSpec::pendulum(1.0, 1.0);
        assert_eq!(classify_motion(&pendulum, 0.5).unwrap().kind, MotionKind::Libration);
        assert_eq!(classify_motion(&pendulum, 1.5).unwrap().kind, MotionKind::Rotation);
        assert!(matches!(classify_motion(&pendulum, 1.0), Err(Error::Separatrix { .. })));
        assert_eq!(classify_motion(&PotentialSpec::rotor(2.0), 0.3).unwrap().kind, MotionKind::Rotation);
        assert_eq!(classify_motion(&PotentialSpec::harmonic(1.0, 3.0), 7.0).unwrap().kind, MotionKind::Libration);
    }

    #[test]
    fn harmonic_and_rotor_actions() {
        let ho = PotentialSpec::harmonic(1.0, 1.0);
        let class = classify_motion(&ho, 1.0).unwrap();
        let profile = action(&ho, 1.0, &class).unwrap();
        assert_relative_eq!(profile.action, TAU, max_relative = 1e-12);
        assert_relative_eq!(profile.d_action_d_energy.unwrap(), TAU, max_relative = 1e-10);
        let bottom = classify_motion(&ho, 0.0).unwrap();
        assert_eq!(action(&ho, 0.0, &bottom).unwrap().action, 0.0);

        let rotor = PotentialSpec::rotor(1.0);
        let class = classify_motion(&rotor, 0.5).unwrap();
        assert_relative_eq!(action(&rotor, 0.5, &class).unwrap().action, TAU, max_relative = 1e-12);
    }

    #[test]
    fn harmonic_spectrum_is_half_integer() {
        let s = quantize(&PotentialSpec::harmonic(1.0, 1.0), None, 0..=4, 1.0).unwrap();
        assert_eq!(s.class, MotionKind::Libration);
        for (row, expect) in s.levels.iter().zip([0.5, 1.5, 2.5, 3.5, 4.5]) {
            assert_relative_eq!(row.e_bs, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn rotor_spectrum_is_integer() {
        let s = quantize(&PotentialSpec::rotor(1.0), None, 0..=3, 1.0).unwrap();
        assert_eq!(s.class, MotionKind::Rotation);
        let got: Vec<f64> = s.levels.iter().map(|r| r.e_bs).collect();
        assert_eq!(got[0], 0.0);
        for (e, expect) in got.iter().zip([0.0, 0.5, 2.0, 4.5]).skip(1) {
            assert_relative_eq!(*e, expect, max_relative = 1e-9);
        }
    }

    #[test]
    fn pendulum_librations_stop_at_the_separatrix() {
        let pendulum = PotentialSpec::pendulum(1.0, 1.0);
        let err = quantize(&pendulum, None, 0..=5, 1.0).unwrap_err();
        assert!(matches!(err, Error::BracketExhausted { n: 3, .. }), "{err:?}");
        let deep = PotentialSpec::pendulum(1.0, 20.0);
        let s = quantize(&deep, None, 0..=2, 1.0).unwrap();
        assert!(s.levels.windows(2).all(|w| w[0].e_bs < w[1].e_bs));
        // small oscillations: ω = √g
        assert_relative_eq!(s.levels[0].e_bs + 20.0, 0.5 * 20f64.sqrt(), max_relative = 0.02);
    }

    #[test]
    fn rotation_above_the_barrier() {
        let pendulum = PotentialSpec::pendulum(1.0, 0.1);
        let s = quantize(&pendulum, Some(MotionKind::Rotation), 1..=3, 1.0).unwrap();
        // nearly free rotation: E ≈ n²/2
        for row in &s.levels {
            assert!((row.e_bs - (row.n * row.n) as f64 / 2.0).abs() < 0.05, "{row:?}");
        }
    }

    #[test]
    fn free_particle_has_no_libration() {
        assert!(quantize(&PotentialSpec::free(1.0), None, 0..=1, 1.0).is_err());
    }

    #[test]
    fn quartic_against_oracle() {
        let options = QuantizeOptions {
            oracle: Some(OracleOptions::default()),
            ..QuantizeOptions::default()
        };
        let s = quantize_with(&PotentialSpec::quartic(1.0, 1.0), 3..=6, 1.0, &options).unwrap();
        let first = s.levels[0].relative_error.unwrap();
        assert!(first < 0.02, "{first}");
        for row in &s.levels {
            assert!(row.relative_error.unwrap() <= first);
        }
    }

    #[test]
    fn oracle_indices() {
        assert_eq!(oracle_index(MotionKind::Libration, 3), 3);
        assert_eq!(oracle_index(MotionKind::Rotation, 0), 0);
        assert_eq!(oracle_index(MotionKind::Rotation, 1), 1);
        assert_eq!(oracle_index(MotionKind::Rotation, 3), 5);
    }
}
