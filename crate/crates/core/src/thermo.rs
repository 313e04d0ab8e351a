//! Curvature-temperature matching, the equilibrium energy, and the
//! entropy / free-energy bridge built on the amplitude `ψ = e^{−βV}`.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::model::{
    default_search_interval, find_equilibria, lowest_minimum, CanonicalEnsemble, EquilibriumPoint, PotentialSpec, SeparablePotential, DEFAULT_ROOT_TOLERANCE,
    Stability,
};
use crate::wigner::EquilibriumDensity;

/// Temperature at which the bath width matches the curvature of a minimum:
/// `V''(q0) = m / (β² ħ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub q0: f64,
    pub matched_beta: f64,
    pub matched_temperature: f64,
    pub curvature: f64,
}

impl MatchingReport {
    pub fn ensemble(&self, hbar: f64, k_b: f64) -> CanonicalEnsemble {
        CanonicalEnsemble::natural(self.matched_beta).with_hbar(hbar).with_k_b(k_b)
    }
}

/// Solve the curvature condition at a stable equilibrium for `β` and `T`.
pub fn matching_temperature(spec: &PotentialSpec, q0: &EquilibriumPoint, hbar: f64, k_b: f64) -> Result<MatchingReport> {
    spec.validate()?;
    CanonicalEnsemble::natural(1.0).with_hbar(hbar).with_k_b(k_b).validate()?;
    let curvature = spec.eval(q0.q0)?.curvature;
    if Stability::from_curvature(curvature) != Stability::Minimum {
        return Err(Error::NoRealTemperature { q0: q0.q0, curvature });
    }
    let matched_beta = (spec.mass() / curvature).sqrt() / hbar;
    Ok(MatchingReport {
        q0: q0.q0,
        matched_beta,
        matched_temperature: 1.0 / (2.0 * matched_beta * k_b),
        curvature,
    })
}

/// Matching report at the lowest stable minimum of `spec`.
pub fn match_at_lowest_minimum(spec: &PotentialSpec, hbar: f64, k_b: f64) -> Result<MatchingReport> {
    let interval = default_search_interval(spec);
    let point = match lowest_minimum(spec, interval)? {
        Some(point) => point,
        None => {
            // report the lowest stationary point, which is degenerate or a maximum
            let lowest = find_equilibria(spec, interval, DEFAULT_ROOT_TOLERANCE)?
                .into_iter()
                .min_by(|a, b| spec.value_unchecked(a.q0).total_cmp(&spec.value_unchecked(b.q0)));
            return Err(match lowest {
                Some(p) => Error::NoRealTemperature { q0: p.q0, curvature: p.curvature },
                None => Error::NoRealTemperature { q0: f64::NAN, curvature: f64::NAN },
            });
        }
    };
    matching_temperature(spec, &point, hbar, k_b)
}

/// `E = V(q₁⁰, …, q_N⁰) + N k_B T`.
pub fn equilibrium_energy(
    spec: &SeparablePotential,
    equilibria: &[EquilibriumPoint],
    dof: usize,
    temperature: f64,
    k_b: f64,
) -> Result<f64> {
    ensure_finite("temperature", temperature)?;
    if temperature < 0.0 {
        return Err(Error::InvalidParameter {
            name: "temperature",
            reason: format!("must be non-negative, got {temperature}"),
        });
    }
    if dof != spec.dof() || equilibria.len() != dof {
        return Err(Error::InvalidParameter {
            name: "dof",
            reason: format!(
                "{dof} degrees of freedom requested for a {}-coordinate potential with {} equilibrium coordinates",
                spec.dof(),
                equilibria.len()
            ),
        });
    }
    if let Some(bad) = equilibria.iter().find(|p| p.stability != Stability::Minimum) {
        return Err(Error::NoRealTemperature {
            q0: bad.q0,
            curvature: bad.curvature,
        });
    }
    let q0: Vec<f64> = equilibria.iter().map(|p| p.q0).collect();
    Ok(spec.value(&q0)? + dof as f64 * k_b * temperature)
}

/// Where the reference energy of [`schrodinger_residual`] takes its temperature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureSource {
    /// Curvature-matched temperature of each coordinate's lowest minimum.
    Matched,
    /// The ensemble's own temperature; used when some minimum is degenerate.
    Ensemble,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SchrodingerResidual {
    /// `Σ (βħ²/2m) V'' + V − Σ (β²ħ²/2m) V'²`
    pub lhs: f64,
    pub reference_energy: f64,
    pub residual: f64,
    pub source: TemperatureSource,
}

/// Local energy of `ψ = e^{−βV}` under `−Σ(ħ²/2m)∂² + V`, divided by `ψ`.
pub fn schrodinger_lhs(spec: &SeparablePotential, ens: &CanonicalEnsemble, q: &[f64]) -> Result<f64> {
    ens.validate_for(&spec.masses())?;
    let evals = spec.eval(q)?;
    let (beta, hbar) = (ens.beta, ens.hbar);
    Ok(spec
        .components
        .iter()
        .zip(&evals)
        .map(|(c, e)| {
            let m = c.mass();
            beta * hbar * hbar / (2.0 * m) * e.curvature + e.value
                - beta * beta * hbar * hbar / (2.0 * m) * e.slope * e.slope
        })
        .sum())
}

/// Left side of the amplitude's Schrödinger equation minus the equilibrium
/// energy `Σ V(q0_n) + k_B T_n`.
pub fn schrodinger_residual_separable(
    spec: &SeparablePotential,
    ens: &CanonicalEnsemble,
    q: &[f64],
) -> Result<SchrodingerResidual> {
    let lhs = schrodinger_lhs(spec, ens, q)?;
    let mut minima = Vec::with_capacity(spec.dof());
    for c in &spec.components {
        let p = lowest_minimum(c, default_search_interval(c))?
            .or_else(|| {
                crate::model::find_equilibria(c, default_search_interval(c), crate::model::DEFAULT_ROOT_TOLERANCE)
                    .ok()?
                    .into_iter()
                    .find(|p| p.stability == Stability::Degenerate)
            })
            .ok_or(Error::NoRealTemperature {
                q0: f64::NAN,
                curvature: f64::NAN,
            })?;
        minima.push((c, p));
    }
    let matched: Option<Vec<f64>> = minima
        .iter()
        .map(|(c, p)| matching_temperature(c, p, ens.hbar, ens.k_b).ok().map(|r| r.matched_temperature))
        .collect();
    let (reference_energy, source) = match matched {
        Some(temps) => (
            minima
                .iter()
                .zip(&temps)
                .map(|((c, p), t)| c.value_unchecked(p.q0) + ens.k_b * t)
                .sum(),
            TemperatureSource::Matched,
        ),
        None => (
            minima.iter().map(|(c, p)| c.value_unchecked(p.q0)).sum::<f64>()
                + spec.dof() as f64 * ens.k_b * ens.temperature(),
            TemperatureSource::Ensemble,
        ),
    };
    Ok(SchrodingerResidual {
        lhs,
        reference_energy,
        residual: lhs - reference_energy,
        source,
    })
}

pub fn schrodinger_residual(spec: &PotentialSpec, ens: &CanonicalEnsemble, q: f64) -> Result<SchrodingerResidual> {
    schrodinger_residual_separable(&SeparablePotential::from(spec.clone()), ens, &[q])
}

/// Convention for the amplitude density `ψ†ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// `ψ†ψ = e^{−2βV}` with no constant; `F_G = V` exactly.
    #[default]
    Paper,
    /// `ψ†ψ = e^{−2βV}/Z` with unit probability on the equilibrium box.
    Normalized,
}

impl std::str::FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "paper" => Ok(Self::Paper),
            "normalized" => Ok(Self::Normalized),
            other => Err(format!("unknown normalization `{other}` (expected paper|normalized)")),
        }
    }
}

/// Entropy and free energy sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThermoProfile {
    pub normalization: Normalization,
    pub temperature: f64,
    pub q: Vec<f64>,
    pub potential: Vec<f64>,
    pub psi_sq: Vec<f64>,
    pub entropy: Vec<f64>,
    pub free_energy: Vec<f64>,
}

/// `S(q) = k_B ln ψ†ψ(q)` and `F_G(q) = −T S(q)` on `grid`.
pub fn thermo_profile(
    spec: &PotentialSpec,
    ens: &CanonicalEnsemble,
    grid: &[f64],
    normalization: Normalization,
) -> Result<ThermoProfile> {
    ens.validate_for(&[spec.mass()])?;
    let density = match normalization {
        Normalization::Paper => None,
        Normalization::Normalized => Some(EquilibriumDensity::new(spec, ens.beta, None)?),
    };
    let temperature = ens.temperature();
    let n = grid.len();
    let mut profile = ThermoProfile {
        normalization,
        temperature,
        q: Vec::with_capacity(n),
        potential: Vec::with_capacity(n),
        psi_sq: Vec::with_capacity(n),
        entropy: Vec::with_capacity(n),
        free_energy: Vec::with_capacity(n),
    };
    for &q in grid {
        let v = spec.eval(q)?.value;
        // the logarithm is taken analytically; ln(exp(x)) loses digits near 1
        let log_psi_sq = match &density {
            None => -2.0 * ens.beta * v,
            Some(d) => d.log_density_from_value(v),
        };
        let psi_sq = log_psi_sq.exp();
        if !(psi_sq > 0.0 && psi_sq.is_finite()) {
            return Err(Error::LogDomain { q });
        }
        let entropy = ens.k_b * log_psi_sq;
        profile.q.push(q);
        profile.potential.push(v);
        profile.psi_sq.push(psi_sq);
        profile.entropy.push(entropy);
        profile.free_energy.push(-temperature * entropy);
    }
    Ok(profile)
}

/// Matching report plus the equilibrium energy at the matched temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoSummary {
    pub q0: f64,
    pub beta_matched: f64,
    #[serde(rename = "T_matched")]
    pub t_matched: f64,
    #[serde(rename = "E")]
    pub energy: f64,
}

pub fn thermo_summary(spec: &PotentialSpec, hbar: f64, k_b: f64) -> Result<ThermoSummary> {
    let report = match_at_lowest_minimum(spec, hbar, k_b)?;
    let point = EquilibriumPoint::at(spec, report.q0)?;
    let energy = equilibrium_energy(
        &SeparablePotential::from(spec.clone()),
        &[point],
        1,
        report.matched_temperature,
        k_b,
    )?;
    Ok(ThermoSummary {
        q0: report.q0,
        beta_matched: report.matched_beta,
        t_matched: report.matched_temperature,
        energy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::find_equilibria;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn origin(spec: &PotentialSpec) -> EquilibriumPoint {
        EquilibriumPoint::at(spec, 0.0).unwrap()
    }

    #[test]
    fn unit_harmonic_matching() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let r = matching_temperature(&spec, &origin(&spec), 1.0, 1.0).unwrap();
        assert_eq!(r.matched_beta, 1.0);
        assert_eq!(r.matched_temperature, 0.5);
    }

    #[test]
    fn stiffer_harmonic_matching() {
        let spec = PotentialSpec::harmonic(1.0, 2.0);
        let r = matching_temperature(&spec, &origin(&spec), 1.0, 1.0).unwrap();
        assert_eq!(r.matched_beta, 0.5);
        assert_eq!(r.matched_temperature, 1.0);
    }

    #[test]
    fn maximum_has_no_temperature() {
        let spec = PotentialSpec::pendulum(1.0, 1.0);
        let top = EquilibriumPoint::at(&spec, PI).unwrap();
        let err = matching_temperature(&spec, &top, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NoRealTemperature { .. }));
        let quartic = PotentialSpec::quartic(1.0, 1.0);
        assert!(matching_temperature(&quartic, &origin(&quartic), 1.0, 1.0).is_err());
    }

    #[test]
    fn equilibrium_energy_cases() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let sep = SeparablePotential::from(spec.clone());
        assert_eq!(equilibrium_energy(&sep, &[origin(&spec)], 1, 0.5, 1.0).unwrap(), 0.5);
        assert_eq!(equilibrium_energy(&sep, &[origin(&spec)], 1, 0.0, 1.0).unwrap(), 0.0);

        let shifted = PotentialSpec::polynomial(1.0, vec![-2.0, 0.0, 0.5]);
        let sep = SeparablePotential::from(shifted.clone());
        assert_eq!(equilibrium_energy(&sep, &[origin(&shifted)], 1, 0.0, 1.0).unwrap(), -2.0);

        let two = SeparablePotential::new(vec![spec.clone(), spec.clone()]);
        let p = origin(&spec);
        assert_eq!(equilibrium_energy(&two, &[p, p], 2, 0.5, 1.0).unwrap(), 1.0);
        assert!(equilibrium_energy(&two, &[p], 2, 0.5, 1.0).is_err());
    }

    #[test]
    fn residual_vanishes_for_matched_harmonic() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(1.0);
        let r0 = schrodinger_residual(&spec, &ens, 0.0).unwrap();
        assert_eq!(r0.source, TemperatureSource::Matched);
        assert_eq!(r0.lhs, 0.5);
        assert_eq!(r0.residual, 0.0);
        assert!(schrodinger_residual(&spec, &ens, 3.7).unwrap().residual.abs() <= 1e-12);
    }

    #[test]
    fn quartic_residual_depends_on_position() {
        let spec = PotentialSpec::quartic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(1.0);
        let at0 = schrodinger_residual(&spec, &ens, 0.0).unwrap();
        let at1 = schrodinger_residual(&spec, &ens, 1.0).unwrap();
        assert_eq!(at0.source, TemperatureSource::Ensemble);
        // lhs(1) = (1/2)(3) + 1/4 - (1/2)(1) = 1.25, lhs(0) = 0
        assert_relative_eq!(at1.lhs, 1.25, max_relative = 1e-15);
        assert_eq!(at0.lhs, 0.0);
        assert!(at0.residual != at1.residual);
    }

    #[test]
    fn separable_residual_sums_coordinates() {
        let a = PotentialSpec::harmonic(1.0, 1.0);
        let b = PotentialSpec::harmonic(1.0, 1.0);
        let sep = SeparablePotential::new(vec![a, b]);
        let r = schrodinger_residual_separable(&sep, &CanonicalEnsemble::natural(1.0), &[0.4, -2.0]).unwrap();
        assert_relative_eq!(r.lhs, 1.0, max_relative = 1e-15);
        assert!(r.residual.abs() <= 1e-12);
    }

    #[test]
    fn profile_paper_convention() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(1.0);
        let p = thermo_profile(&spec, &ens, &[1.0, 0.0], Normalization::Paper).unwrap();
        assert_relative_eq!(p.entropy[0], -1.0, max_relative = 1e-15);
        assert_relative_eq!(p.free_energy[0], 0.5, max_relative = 1e-15);
        assert_eq!(p.entropy[1], 0.0);
        assert_eq!(p.free_energy[1], 0.0);
    }

    #[test]
    fn profile_normalized_convention_shifts_by_constant() {
        let spec = PotentialSpec::quartic(1.0, 1.0);
        let ens = CanonicalEnsemble::natural(0.8);
        let grid: Vec<f64> = (0..41).map(|k| -2.0 + 0.1 * k as f64).collect();
        let p = thermo_profile(&spec, &ens, &grid, Normalization::Normalized).unwrap();
        let shifts: Vec<f64> = p.free_energy.iter().zip(&p.potential).map(|(f, v)| f - v).collect();
        let spread = shifts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - shifts.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread <= 1e-12 * shifts[0].abs().max(1.0), "{spread}");
    }

    #[test]
    fn profile_reports_vanishing_density() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let err = thermo_profile(&spec, &CanonicalEnsemble::natural(1.0), &[0.0, 40.0], Normalization::Paper).unwrap_err();
        assert_eq!(err, Error::LogDomain { q: 40.0 });
    }

    #[test]
    fn summary_for_unit_oscillator() {
        let s = thermo_summary(&PotentialSpec::harmonic(1.0, 1.0), 1.0, 1.0).unwrap();
        assert_eq!((s.q0, s.beta_matched, s.t_matched, s.energy), (0.0, 1.0, 0.5, 0.5));
        let pts = find_equilibria(&PotentialSpec::harmonic(1.0, 1.0), (-5.0, 5.0), 1e-12).unwrap();
        assert_eq!(pts[0].q0, s.q0);
    }
}
