//! Classical boundary-value paths, their action, and the phase of the
//! time-sliced propagator `K ∝ A e^{(i/ħ)S_cl} e^{−(i/ħ)E Δt}`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};
use crate::model::PotentialSpec;
use crate::quadrature::trapezoid_samples;

/// Iteration cap for the secant shooting method.
pub const SHOOTING_ITERATIONS: usize = 100;
/// Endpoint miss accepted by the shooting method.
pub const SHOOTING_TOLERANCE: f64 = 1e-10;
/// `|sin ωt|` below which a harmonic boundary-value problem is singular.
pub const CONJUGATE_TOLERANCE: f64 = 1e-10;
/// Slice count used by [`kernel_phase`]; the action is extrapolated from
/// this and twice this.
pub const KERNEL_SLICES: usize = 1 << 14;

/// A classical path sampled on `N + 1` uniform times from `t_a` to `t_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub q_a: f64,
    pub t_a: f64,
    pub q_b: f64,
    pub t_b: f64,
    pub mass: f64,
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
}

impl Trajectory {
    pub fn slices(&self) -> usize {
        self.times.len() - 1
    }

    pub fn step(&self) -> f64 {
        (self.t_b - self.t_a) / self.slices() as f64
    }

    pub fn lagrangian(&self, spec: &PotentialSpec) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.qdot)
            .map(|(&q, &v)| 0.5 * self.mass * v * v - spec.value_unchecked(q))
            .collect()
    }

    pub fn energies(&self, spec: &PotentialSpec) -> Vec<f64> {
        self.q
            .iter()
            .zip(&self.qdot)
            .map(|(&q, &v)| 0.5 * self.mass * v * v + spec.value_unchecked(q))
            .collect()
    }

    /// Energy at the initial point.
    pub fn energy(&self, spec: &PotentialSpec) -> f64 {
        0.5 * self.mass * self.qdot[0] * self.qdot[0] + spec.value_unchecked(self.q[0])
    }
}

/// Phase of the propagator between two endpoints.
///
/// `total_phase = (s_cl − energy_phase) / ħ`; `prefactor_log = slices · ln m`
/// is the log of the Jacobian product and is never exponentiated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelPhase {
    #[serde(rename = "S_cl")]
    pub s_cl: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub energy_phase: f64,
    pub total_phase: f64,
    pub prefactor_log: f64,
    pub slices: usize,
}

impl KernelPhase {
    fn new(s_cl: f64, energy: f64, duration: f64, hbar: f64, mass: f64, slices: usize) -> Self {
        let energy_phase = energy * duration;
        Self {
            s_cl,
            energy,
            energy_phase,
            total_phase: (s_cl - energy_phase) / hbar,
            prefactor_log: slices as f64 * mass.ln(),
            slices,
        }
    }
}

fn check_inputs(spec: &PotentialSpec, q_a: f64, q_b: f64, duration: f64, slices: usize) -> Result<()> {
    spec.validate()?;
    ensure_finite("q_a", q_a)?;
    ensure_finite("q_b", q_b)?;
    ensure_positive("time", duration)?;
    if slices == 0 {
        return Err(Error::InvalidParameter {
            name: "slices",
            reason: "need at least one slice".into(),
        });
    }
    Ok(())
}

/// The classical path from `(q_a, 0)` to `(q_b, duration)`.
///
/// Free particles, rotors and harmonic oscillators use the closed-form path;
/// other potentials are shot on the initial velocity with RK4 on the same grid.
pub fn classical_trajectory(spec: &PotentialSpec, q_a: f64, q_b: f64, duration: f64, slices: usize) -> Result<Trajectory> {
    check_inputs(spec, q_a, q_b, duration, slices)?;
    let m = spec.mass();
    let dt = duration / slices as f64;
    let times: Vec<f64> = (0..=slices).map(|i| i as f64 * dt).collect();
    let (q, qdot) = match *spec {
        PotentialSpec::Free { .. } | PotentialSpec::Rotor { .. } => {
            let v = (q_b - q_a) / duration;
            (times.iter().map(|&s| q_a + v * s).collect(), vec![v; slices + 1])
        }
        PotentialSpec::Harmonic { omega, .. } => {
            let sine = (omega * duration).sin();
            if sine.abs() < CONJUGATE_TOLERANCE {
                return Err(Error::ConjugatePoint { duration, sine });
            }
            let q = times
                .iter()
                .map(|&s| (q_a * (omega * (duration - s)).sin() + q_b * (omega * s).sin()) / sine)
                .collect();
            let qdot = times
                .iter()
                .map(|&s| omega * (q_b * (omega * s).cos() - q_a * (omega * (duration - s)).cos()) / sine)
                .collect();
            (q, qdot)
        }
        _ => shoot(spec, q_a, q_b, duration, slices)?,
    };
    let mut traj = Trajectory {
        q_a,
        t_a: 0.0,
        q_b,
        t_b: duration,
        mass: m,
        times,
        q,
        qdot,
    };
    // pin the endpoints exactly
    traj.q[0] = q_a;
    traj.q[slices] = q_b;
    Ok(traj)
}

fn rk4(spec: &PotentialSpec, q0: f64, v0: f64, dt: f64, slices: usize) -> (Vec<f64>, Vec<f64>) {
    let m = spec.mass();
    let acc = |q: f64| -spec.eval_unchecked(q).slope / m;
    let mut q = Vec::with_capacity(slices + 1);
    let mut v = Vec::with_capacity(slices + 1);
    let (mut x, mut u) = (q0, v0);
    q.push(x);
    v.push(u);
    for _ in 0..slices {
        let k1x = u;
        let k1v = acc(x);
        let k2x = u + 0.5 * dt * k1v;
        let k2v = acc(x + 0.5 * dt * k1x);
        let k3x = u + 0.5 * dt * k2v;
        let k3v = acc(x + 0.5 * dt * k2x);
        let k4x = u + dt * k3v;
        let k4v = acc(x + dt * k3x);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        u += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        q.push(x);
        v.push(u);
    }
    (q, v)
}

fn shoot(spec: &PotentialSpec, q_a: f64, q_b: f64, duration: f64, slices: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = duration / slices as f64;
    let miss = |v0: f64| {
        let (q, v) = rk4(spec, q_a, v0, dt, slices);
        (q[slices] - q_b, q, v)
    };
    let mut v_prev = (q_b - q_a) / duration;
    let (mut f_prev, mut q, mut v) = miss(v_prev);
    if f_prev.abs() <= SHOOTING_TOLERANCE {
        return Ok((q, v));
    }
    let mut v_curr = v_prev + 0.1 * v_prev.abs().max(1.0 / duration);
    let mut f_curr;
    (f_curr, q, v) = miss(v_curr);
    for _ in 0..SHOOTING_ITERATIONS {
        if f_curr.abs() <= SHOOTING_TOLERANCE {
            return Ok((q, v));
        }
        let denom = f_curr - f_prev;
        if !f_curr.is_finite() || denom == 0.0 {
            break;
        }
        let next = v_curr - f_curr * (v_curr - v_prev) / denom;
        v_prev = v_curr;
        f_prev = f_curr;
        v_curr = next;
        (f_curr, q, v) = miss(v_curr);
    }
    Err(Error::NoTrajectory {
        iterations: SHOOTING_ITERATIONS,
        miss: f_curr.abs(),
    })
}

/// Initial-value RK4 orbit from `(q0, v0)` over `duration`.
pub fn integrate_orbit(spec: &PotentialSpec, q0: f64, v0: f64, duration: f64, slices: usize) -> Result<Trajectory> {
    check_inputs(spec, q0, q0, duration, slices)?;
    ensure_finite("v0", v0)?;
    let dt = duration / slices as f64;
    let (q, qdot) = rk4(spec, q0, v0, dt, slices);
    Ok(Trajectory {
        q_a: q0,
        t_a: 0.0,
        q_b: q[slices],
        t_b: duration,
        mass: spec.mass(),
        times: (0..=slices).map(|i| i as f64 * dt).collect(),
        q,
        qdot,
    })
}

/// `∫ p q̇ dt` along the sampled path (trapezoid rule). Over one full period
/// this is the loop action `∮ p dq`.
pub fn orbit_action(traj: &Trajectory) -> f64 {
    let integrand: Vec<f64> = traj.qdot.iter().map(|v| traj.mass * v * v).collect();
    trapezoid_samples(&integrand, traj.step())
}

/// `S_cl = ∫ L dt` by the trapezoid rule on the trajectory samples.
pub fn classical_action(traj: &Trajectory, spec: &PotentialSpec) -> f64 {
    trapezoid_samples(&traj.lagrangian(spec), traj.step())
}

/// Left-endpoint sum `(1/ħ) Σ [L(t_n) − E] δt` over the slices of `traj`.
pub fn sliced_phase(traj: &Trajectory, spec: &PotentialSpec, energy: f64, hbar: f64) -> Result<KernelPhase> {
    ensure_finite("energy", energy)?;
    ensure_positive("hbar", hbar)?;
    let slices = traj.slices();
    let lagrangian = traj.lagrangian(spec);
    let sum: f64 = lagrangian[..slices].iter().sum::<f64>() * traj.step();
    Ok(KernelPhase::new(sum, energy, traj.t_b - traj.t_a, hbar, traj.mass, slices))
}

/// Converged propagator phase between `(q_a, 0)` and `(q_b, duration)`.
///
/// The action is the Richardson extrapolation of the trapezoid rule on
/// [`KERNEL_SLICES`] and twice as many slices. `energy` defaults to the
/// energy of the classical path.
pub fn kernel_phase(
    spec: &PotentialSpec,
    q_a: f64,
    q_b: f64,
    duration: f64,
    energy: Option<f64>,
    hbar: f64,
) -> Result<KernelPhase> {
    ensure_positive("hbar", hbar)?;
    let coarse = classical_trajectory(spec, q_a, q_b, duration, KERNEL_SLICES)?;
    let fine = classical_trajectory(spec, q_a, q_b, duration, 2 * KERNEL_SLICES)?;
    let s_cl = (4.0 * classical_action(&fine, spec) - classical_action(&coarse, spec)) / 3.0;
    let energy = match energy {
        Some(e) => {
            ensure_finite("energy", e)?;
            e
        }
        None => fine.energy(spec),
    };
    Ok(KernelPhase::new(s_cl, energy, duration, hbar, fine.mass, fine.slices()))
}

/// Two-point action of the harmonic oscillator,
/// `(mω / 2 sin ωt) [(q_a² + q_b²) cos ωt − 2 q_a q_b]`.
pub fn harmonic_action(m: f64, omega: f64, q_a: f64, q_b: f64, duration: f64) -> f64 {
    let (s, c) = (omega * duration).sin_cos();
    m * omega / (2.0 * s) * ((q_a * q_a + q_b * q_b) * c - 2.0 * q_a * q_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn free_particle_path_and_action() {
        let free = PotentialSpec::free(1.0);
        for n in [1, 7, 100] {
            let traj = classical_trajectory(&free, 0.0, 1.0, 1.0, n).unwrap();
            for (s, q) in traj.times.iter().zip(&traj.q) {
                assert_relative_eq!(*q, *s, epsilon = 1e-15);
            }
            assert!(traj.qdot.iter().all(|&v| v == 1.0));
            assert!((classical_action(&traj, &free) - 0.5).abs() <= 1e-15);
            let phase = sliced_phase(&traj, &free, 0.5, 1.0).unwrap();
            assert!(phase.total_phase.abs() <= 1e-15);
        }
        let k = kernel_phase(&free, 0.0, 1.0, 1.0, Some(0.0), 1.0).unwrap();
        assert_relative_eq!(k.total_phase, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn harmonic_paths() {
        let ho = PotentialSpec::harmonic(1.0, 1.0);
        let rest = classical_trajectory(&ho, 0.0, 0.0, 1.0, 10).unwrap();
        assert!(rest.q.iter().all(|&q| q == 0.0));
        assert_eq!(classical_action(&rest, &ho), 0.0);

        let traj = classical_trajectory(&ho, 1.0, 1.0, FRAC_PI_2, 64).unwrap();
        for (s, q) in traj.times.iter().zip(&traj.q) {
            assert_relative_eq!(*q, s.cos() + s.sin(), epsilon = 1e-14);
        }
        assert_relative_eq!(traj.energy(&ho), 1.0, epsilon = 1e-14);
        let k = kernel_phase(&ho, 1.0, 1.0, FRAC_PI_2, Some(0.0), 1.0).unwrap();
        assert_relative_eq!(k.total_phase, -1.0, epsilon = 1e-12);
        assert_relative_eq!(harmonic_action(1.0, 1.0, 1.0, 1.0, FRAC_PI_2), -1.0, epsilon = 1e-15);
    }

    #[test]
    fn focal_time_is_rejected() {
        let ho = PotentialSpec::harmonic(1.0, 2.0);
        let err = classical_trajectory(&ho, 1.0, 0.5, std::f64::consts::FRAC_PI_2, 10).unwrap_err();
        assert!(matches!(err, Error::ConjugatePoint { .. }), "{err:?}");
    }

    #[test]
    fn shooting_matches_the_analytic_harmonic_path() {
        // a quadratic polynomial takes the shooting branch
        let poly = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, 0.5]);
        let shot = classical_trajectory(&poly, 0.3, -0.7, 1.2, 2000).unwrap();
        let exact = classical_trajectory(&PotentialSpec::harmonic(1.0, 1.0), 0.3, -0.7, 1.2, 2000).unwrap();
        for (a, b) in shot.q.iter().zip(&exact.q) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn shooting_conserves_energy() {
        let quartic = PotentialSpec::quartic(1.0, 1.0);
        let traj = classical_trajectory(&quartic, -0.5, 1.0, 1.0, 10_000).unwrap();
        assert!((traj.q[10_000] - 1.0).abs() <= 1e-10);
        let e = traj.energies(&quartic);
        let spread = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - e.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-8 * (e[0].abs() + 1.0), "{spread}");
    }

    #[test]
    fn sliced_sum_is_first_order_for_asymmetric_endpoints() {
        // L(0) ≠ L(t) here, so the left-endpoint error halves with N
        let ho = PotentialSpec::harmonic(1.0, 1.0);
        let exact = harmonic_action(1.0, 1.0, 0.0, 1.0, 1.0);
        let err = |n: usize| {
            let traj = classical_trajectory(&ho, 0.0, 1.0, 1.0, n).unwrap();
            (sliced_phase(&traj, &ho, 0.0, 1.0).unwrap().total_phase - exact).abs()
        };
        let ratio = err(1000) / err(2000);
        assert!((1.8..=2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn phase_is_additive_along_a_path() {
        for spec in [PotentialSpec::harmonic(1.0, 1.3), PotentialSpec::quartic(1.0, 1.0)] {
            let (q_a, q_b, t) = (0.2, 0.9, 1.1);
            let whole = kernel_phase(&spec, q_a, q_b, t, None, 1.0).unwrap();
            let traj = classical_trajectory(&spec, q_a, q_b, t, 1000).unwrap();
            let q_m = traj.q[400];
            let t_m = traj.times[400];
            let first = kernel_phase(&spec, q_a, q_m, t_m, Some(whole.energy), 1.0).unwrap();
            let second = kernel_phase(&spec, q_m, q_b, t - t_m, Some(whole.energy), 1.0).unwrap();
            assert!((whole.total_phase - first.total_phase - second.total_phase).abs() <= 1e-8);
        }
    }

    #[test]
    fn prefactor_log_counts_slices() {
        let ho = PotentialSpec::harmonic(2.0, 1.0);
        let traj = classical_trajectory(&ho, 0.0, 1.0, 1.0, 10).unwrap();
        let phase = sliced_phase(&traj, &ho, 0.0, 1.0).unwrap();
        assert_relative_eq!(phase.prefactor_log, 10.0 * 2f64.ln());
    }
}
