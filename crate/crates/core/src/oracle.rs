//! Finite-difference eigensolver for `−(ħ²/2m) ψ'' + V ψ = E ψ`.
//!
//! Second-order central differences on a uniform grid, lowest eigenvalues by
//! Sturm bisection, one Richardson step (grid spacing halved) to remove the
//! leading `h²` error. Periodic problems are split into even and odd sectors
//! about the left end of the box, which requires `V(lo + x) = V(lo − x)`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::model::{CanonicalEnsemble, PotentialSpec};
use crate::tridiagonal::SymTridiagonal;

pub const DEFAULT_GRID_POINTS: usize = 4096;
pub const MIN_GRID_POINTS: usize = 64;
/// Wall amplitude allowed relative to the peak of each eigenvector.
pub const WALL_RATIO: f64 = 1e-6;
/// Default relative tolerance on the Richardson error estimate.
pub const DEFAULT_RESOLUTION_TOLERANCE: f64 = 1e-6;
/// Decay exponent `∫ κ dq` required beyond the outermost turning point.
const TUNNELING_DEPTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Dirichlet,
    Periodic,
}

impl std::str::FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "dirichlet" => Ok(Self::Dirichlet),
            "periodic" => Ok(Self::Periodic),
            other => Err(format!("unknown boundary `{other}` (expected dirichlet|periodic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleOptions {
    /// Interior points (Dirichlet) or ring points (periodic) of the coarse grid.
    pub grid_points: usize,
    /// Combine the coarse grid with a grid of half the spacing.
    pub richardson: bool,
    /// Relative tolerance on `|E_extrapolated − E_fine|`.
    pub tolerance: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            richardson: true,
            tolerance: DEFAULT_RESOLUTION_TOLERANCE,
        }
    }
}

/// Lowest eigenpairs of the discretized Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenSolution {
    pub boundary: Boundary,
    pub bounds: (f64, f64),
    /// Requested (coarse) grid size.
    pub grid_points: usize,
    /// Eigenvalues, ascending; Richardson-extrapolated when enabled.
    pub eigenvalues: Vec<f64>,
    /// Eigenvalues of the matrix on [`Self::grid`], the one the vectors live on.
    pub raw_eigenvalues: Vec<f64>,
    /// `|E_extrapolated − E_fine|` per level (zero without Richardson).
    pub error_estimates: Vec<f64>,
    pub grid: Vec<f64>,
    pub spacing: f64,
    /// Eigenvectors normalized so that `Σ ψ_i² h = 1`.
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<f64>>,
    #[serde(skip)]
    potential: Vec<f64>,
    #[serde(skip)]
    kinetic: f64,
}

impl EigenSolution {
    /// `ψᵀ H ψ / ψᵀ ψ` on the vector grid.
    pub fn rayleigh_quotient(&self, level: usize) -> f64 {
        let psi = &self.eigenvectors[level];
        let n = psi.len();
        let c = self.kinetic;
        let neighbour = |i: isize| -> f64 {
            match self.boundary {
                Boundary::Dirichlet => {
                    if i < 0 || i >= n as isize {
                        0.0
                    } else {
                        psi[i as usize]
                    }
                }
                Boundary::Periodic => psi[i.rem_euclid(n as isize) as usize],
            }
        };
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, (&x, &v)) in psi.iter().zip(&self.potential).enumerate() {
            let hpsi = (2.0 * c + v) * x - c * (neighbour(i as isize - 1) + neighbour(i as isize + 1));
            num += x * hpsi;
            den += x * x;
        }
        num / den
    }

    /// Largest endpoint magnitude relative to the peak, for one level.
    pub fn wall_ratio(&self, level: usize) -> f64 {
        let psi = &self.eigenvectors[level];
        let peak = psi.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
        let ends = psi[0].abs().max(psi[psi.len() - 1].abs());
        if peak > 0.0 {
            ends / peak
        } else {
            0.0
        }
    }

    /// Grid inner product `Σ a_i b_i h`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.spacing
    }
}

struct Discrete {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    grid: Vec<f64>,
    potential: Vec<f64>,
    spacing: f64,
    kinetic: f64,
}

fn solve_dirichlet(spec: &PotentialSpec, hbar: f64, (lo, hi): (f64, f64), interior: usize, k: usize, vectors: bool) -> Result<Discrete> {
    let h = (hi - lo) / (interior + 1) as f64;
    let c = hbar * hbar / (2.0 * spec.mass() * h * h);
    let grid: Vec<f64> = (1..=interior).map(|i| lo + i as f64 * h).collect();
    let potential = grid.iter().map(|&x| spec.eval(x).map(|e| e.value)).collect::<Result<Vec<_>>>()?;
    let matrix = SymTridiagonal::new(potential.iter().map(|v| 2.0 * c + v).collect(), vec![-c; interior - 1]);
    let values = matrix.lowest(k);
    let mut vecs: Vec<Vec<f64>> = Vec::new();
    if vectors {
        for &e in &values {
            let v = matrix.eigenvector(e, &vecs);
            vecs.push(v);
        }
        for v in &mut vecs {
            let s = (1.0 / h).sqrt();
            v.iter_mut().for_each(|x| *x *= s);
            orient(v);
        }
    }
    Ok(Discrete {
        values,
        vectors: vecs,
        grid,
        potential,
        spacing: h,
        kinetic: c,
    })
}

fn solve_periodic(spec: &PotentialSpec, hbar: f64, (lo, hi): (f64, f64), ring: usize, k: usize, vectors: bool) -> Result<Discrete> {
    if !ring.is_multiple_of(2) {
        return Err(Error::InvalidParameter {
            name: "grid_points",
            reason: format!("periodic grids need an even number of points, got {ring}"),
        });
    }
    let h = (hi - lo) / ring as f64;
    let c = hbar * hbar / (2.0 * spec.mass() * h * h);
    let half = ring / 2;
    let grid: Vec<f64> = (0..ring).map(|j| lo + j as f64 * h).collect();
    let potential = grid.iter().map(|&x| spec.eval(x).map(|e| e.value)).collect::<Result<Vec<_>>>()?;
    let scale = potential.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
    for j in 1..half {
        if (potential[j] - potential[ring - j]).abs() > 1e-12 * scale {
            return Err(Error::Unsupported(format!(
                "periodic solver needs V symmetric about q = {lo}; V({}) ≠ V({})",
                grid[j],
                grid[ring - j]
            )));
        }
    }
    let root2 = std::f64::consts::SQRT_2;
    // even sector: j = 0..=half, coupling √2 c at both ends after symmetrization
    let mut even_off = vec![-c; half];
    even_off[0] = -root2 * c;
    even_off[half - 1] = -root2 * c;
    let even = SymTridiagonal::new((0..=half).map(|j| 2.0 * c + potential[j]).collect(), even_off);
    // odd sector: j = 1..half, ψ_0 = ψ_half = 0
    let odd = SymTridiagonal::new((1..half).map(|j| 2.0 * c + potential[j]).collect(), vec![-c; half - 2]);

    let mut levels: Vec<(f64, bool)> = even
        .lowest(k)
        .into_iter()
        .map(|e| (e, true))
        .chain(odd.lowest(k).into_iter().map(|e| (e, false)))
        .collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    levels.truncate(k);

    let mut vecs = Vec::new();
    if vectors {
        let mut even_vecs: Vec<Vec<f64>> = Vec::new();
        let mut odd_vecs: Vec<Vec<f64>> = Vec::new();
        for &(e, is_even) in &levels {
            let mut full = vec![0.0; ring];
            if is_even {
                let u = even.eigenvector(e, &even_vecs);
                for j in 0..=half {
                    let w = if j == 0 || j == half { root2 } else { 1.0 };
                    full[j] = w * u[j];
                    if j > 0 && j < half {
                        full[ring - j] = u[j];
                    }
                }
                even_vecs.push(u);
            } else {
                let u = odd.eigenvector(e, &odd_vecs);
                for j in 1..half {
                    full[j] = u[j - 1];
                    full[ring - j] = -u[j - 1];
                }
                odd_vecs.push(u);
            }
            let norm = (full.iter().map(|x| x * x).sum::<f64>() * h).sqrt();
            full.iter_mut().for_each(|x| *x /= norm);
            orient(&mut full);
            vecs.push(full);
        }
    }
    Ok(Discrete {
        values: levels.into_iter().map(|(e, _)| e).collect(),
        vectors: vecs,
        grid,
        potential,
        spacing: h,
        kinetic: c,
    })
}

/// Fix the sign so the largest-magnitude component is positive.
fn orient(v: &mut [f64]) {
    let (_, big) = v.iter().fold((0.0_f64, 0.0_f64), |(m, s), &x| if x.abs() > m { (x.abs(), x) } else { (m, s) });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn solve(
    spec: &PotentialSpec,
    hbar: f64,
    bounds: (f64, f64),
    points: usize,
    k: usize,
    boundary: Boundary,
    vectors: bool,
) -> Result<Discrete> {
    match boundary {
        Boundary::Dirichlet => solve_dirichlet(spec, hbar, bounds, points, k, vectors),
        Boundary::Periodic => solve_periodic(spec, hbar, bounds, points, k, vectors),
    }
}

/// Lowest `k` eigenpairs of `spec` on `bounds` (chosen automatically when `None`).
pub fn fd_eigensolve(
    spec: &PotentialSpec,
    hbar: f64,
    bounds: Option<(f64, f64)>,
    k: usize,
    boundary: Boundary,
    options: &OracleOptions,
) -> Result<EigenSolution> {
    spec.validate()?;
    ensure_positive("hbar", hbar)?;
    ensure_positive("tolerance", options.tolerance)?;
    if options.grid_points < MIN_GRID_POINTS {
        return Err(Error::InvalidParameter {
            name: "grid_points",
            reason: format!("need at least {MIN_GRID_POINTS} grid points, got {}", options.grid_points),
        });
    }
    if k == 0 || k > options.grid_points / 4 {
        return Err(Error::InvalidParameter {
            name: "levels",
            reason: format!("level count {k} must be between 1 and grid_points/4"),
        });
    }
    match bounds {
        Some(b) => {
            if !(b.0.is_finite() && b.1.is_finite() && b.0 < b.1) {
                return Err(Error::InvalidParameter {
                    name: "box",
                    reason: format!("invalid box [{}, {}]", b.0, b.1),
                });
            }
            solve_on_box(spec, hbar, b, k, boundary, options)
        }
        None => match boundary {
            Boundary::Periodic => {
                let period = spec.period().unwrap_or(TAU);
                solve_on_box(spec, hbar, (0.0, period), k, boundary, options)
            }
            Boundary::Dirichlet => {
                let mut b = auto_box(spec, hbar, k)?;
                let mut last = None;
                for _ in 0..6 {
                    match solve_on_box(spec, hbar, b, k, boundary, options) {
                        Err(e @ Error::BoxTooSmall { .. }) => {
                            last = Some(e);
                            let mid = 0.5 * (b.0 + b.1);
                            let half = 0.625 * (b.1 - b.0);
                            b = (mid - half, mid + half);
                        }
                        other => return other,
                    }
                }
                Err(last.expect("at least one attempt"))
            }
        },
    }
}

fn solve_on_box(
    spec: &PotentialSpec,
    hbar: f64,
    bounds: (f64, f64),
    k: usize,
    boundary: Boundary,
    options: &OracleOptions,
) -> Result<EigenSolution> {
    let coarse_points = options.grid_points;
    let (fine, coarse) = if options.richardson {
        let fine_points = match boundary {
            Boundary::Dirichlet => 2 * coarse_points + 1,
            Boundary::Periodic => 2 * coarse_points,
        };
        let fine = solve(spec, hbar, bounds, fine_points, k, boundary, true)?;
        let coarse = solve(spec, hbar, bounds, coarse_points, k, boundary, false)?;
        (fine, Some(coarse))
    } else {
        (solve(spec, hbar, bounds, coarse_points, k, boundary, true)?, None)
    };

    let (eigenvalues, error_estimates): (Vec<f64>, Vec<f64>) = match &coarse {
        Some(c) => fine
            .values
            .iter()
            .zip(&c.values)
            .map(|(&f, &c)| {
                let e = (4.0 * f - c) / 3.0;
                (e, (e - f).abs())
            })
            .unzip(),
        None => (fine.values.clone(), vec![0.0; fine.values.len()]),
    };

    let solution = EigenSolution {
        boundary,
        bounds,
        grid_points: coarse_points,
        eigenvalues,
        raw_eigenvalues: fine.values,
        error_estimates,
        grid: fine.grid,
        spacing: fine.spacing,
        eigenvectors: fine.vectors,
        potential: fine.potential,
        kinetic: fine.kinetic,
    };

    if boundary == Boundary::Dirichlet {
        for level in 0..solution.eigenvectors.len() {
            let ratio = solution.wall_ratio(level);
            if ratio > WALL_RATIO {
                return Err(Error::BoxTooSmall {
                    lo: bounds.0,
                    hi: bounds.1,
                    level,
                    ratio,
                });
            }
        }
    }
    let energy_scale = hbar * hbar / (spec.mass() * (bounds.1 - bounds.0).powi(2));
    for (level, (&e, &est)) in solution.eigenvalues.iter().zip(&solution.error_estimates).enumerate() {
        let tolerance = options.tolerance * e.abs().max(energy_scale);
        if est > tolerance {
            return Err(Error::Resolution {
                level,
                estimate: est,
                tolerance,
            });
        }
    }
    Ok(solution)
}

/// Box reaching `TUNNELING_DEPTH` decay lengths beyond the classical turning
/// points of an estimate of the highest requested level.
fn auto_box(spec: &PotentialSpec, hbar: f64, k: usize) -> Result<(f64, f64)> {
    let (q_min, v_min) = spec
        .global_minimum()
        .ok_or_else(|| Error::Unsupported(format!("the {} potential is unbounded below", spec.family())))?;
    let m = spec.mass();
    let v = |q: f64| spec.value_unchecked(q);

    // ground-state length: V(q_min ± l) − v_min = ħ²/(2 m l²)
    let balance = |l: f64| (v(q_min + l) - v_min).max(v(q_min - l) - v_min) - hbar * hbar / (2.0 * m * l * l);
    let (mut a, mut b) = (1e-8, 1e-8);
    while balance(b) < 0.0 {
        a = b;
        b *= 2.0;
        if b > 1e8 {
            return Err(Error::Unsupported(format!("cannot size a box for the {} potential", spec.family())));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if balance(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let length = b;
    let epsilon = hbar * hbar / (m * length * length);

    // coarse estimate of the highest requested level
    let mut trial_height = epsilon * (4.0 * k as f64 + 20.0);
    if let Some(d) = spec.dissociation_energy() {
        trial_height = trial_height.min(0.95 * (d - v_min));
    }
    let trial_box = (edge(&v, q_min, v_min + trial_height, -1.0, length)?, edge(&v, q_min, v_min + trial_height, 1.0, length)?);
    let trial = solve_dirichlet(spec, hbar, trial_box, 1024, k, false)?;
    let top = *trial.values.last().expect("k >= 1");
    let gap = if k >= 2 { top - trial.values[k - 2] } else { epsilon };
    let mut e_max = top + gap;
    if let Some(d) = spec.dissociation_energy() {
        if top >= d {
            return Err(Error::Unsupported(format!("{k} levels exceed the dissociation energy {d}")));
        }
        e_max = e_max.min(0.5 * (top + d));
    }

    let left = edge(&v, q_min, e_max, -1.0, length)?;
    let right = edge(&v, q_min, e_max, 1.0, length)?;
    let decay = |start: f64, dir: f64| -> Result<f64> {
        let step = 0.01 * length;
        let mut q = start;
        let mut depth = 0.0;
        let mut steps = 0usize;
        while depth < TUNNELING_DEPTH {
            q += dir * step;
            depth += (2.0 * m * (v(q) - e_max).max(0.0)).sqrt() / hbar * step;
            steps += 1;
            if steps > 10_000_000 {
                return Err(Error::Unsupported("tunneling tail does not decay; potential not confining".into()));
            }
        }
        Ok(q)
    };
    Ok((decay(left, -1.0)?, decay(right, 1.0)?))
}

fn edge<F: Fn(f64) -> f64>(v: &F, q_min: f64, level: f64, dir: f64, length: f64) -> Result<f64> {
    let mut near = 0.0;
    let mut far = length;
    while v(q_min + dir * far) < level {
        near = far;
        far *= 1.5;
        if far > 1e8 * length {
            return Err(Error::Unsupported(format!("potential does not reach E = {level}; not confining")));
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (near + far);
        if v(q_min + dir * mid) < level {
            near = mid;
        } else {
            far = mid;
        }
    }
    Ok(q_min + dir * far)
}

/// `|⟨e^{−βV} | ψ₀⟩|²` with both states normalized on the solution grid.
pub fn ground_state_overlap(spec: &PotentialSpec, ens: &CanonicalEnsemble, solution: &EigenSolution) -> Result<f64> {
    ens.validate_for(&[spec.mass()])?;
    let ground = solution.eigenvectors.first().ok_or_else(|| Error::InvalidParameter {
        name: "solution",
        reason: "no eigenvectors".into(),
    })?;
    let values = solution.grid.iter().map(|&q| spec.eval(q).map(|e| e.value)).collect::<Result<Vec<_>>>()?;
    let v_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let trial: Vec<f64> = values.iter().map(|v| (-ens.beta * (v - v_min)).exp()).collect();
    let norm = solution.inner(&trial, &trial);
    let amp = solution.inner(&trial, ground);
    Ok((amp * amp / norm).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn harmonic_levels() {
        let sol = fd_eigensolve(
            &PotentialSpec::harmonic(1.0, 1.0),
            1.0,
            Some((-10.0, 10.0)),
            3,
            Boundary::Dirichlet,
            &OracleOptions::default(),
        )
        .unwrap();
        for (e, exact) in sol.eigenvalues.iter().zip([0.5, 1.5, 2.5]) {
            assert!((e - exact).abs() <= 1e-6, "{e} vs {exact}");
        }
    }

    #[test]
    fn rotor_levels_periodic() {
        let sol = fd_eigensolve(&PotentialSpec::rotor(1.0), 1.0, Some((0.0, TAU)), 4, Boundary::Periodic, &OracleOptions::default()).unwrap();
        for (e, exact) in sol.eigenvalues.iter().zip([0.0, 0.5, 0.5, 2.0]) {
            assert!((e - exact).abs() <= 1e-6, "{e} vs {exact}");
        }
        assert!((sol.eigenvalues[2] - sol.eigenvalues[1]).abs() <= 1e-8);
    }

    #[test]
    fn quartic_ground_state_self_convergence() {
        let spec = PotentialSpec::quartic(1.0, 1.0);
        let opts = OracleOptions {
            grid_points: 8192,
            richardson: false,
            ..OracleOptions::default()
        };
        let bounds = Some((-8.0, 8.0));
        let coarse = fd_eigensolve(&spec, 1.0, bounds, 1, Boundary::Dirichlet, &opts).unwrap();
        let finer = fd_eigensolve(
            &spec,
            1.0,
            bounds,
            1,
            Boundary::Dirichlet,
            &OracleOptions {
                grid_points: 2 * 8192 + 1,
                ..opts.clone()
            },
        )
        .unwrap();
        let extrapolated = (4.0 * finer.eigenvalues[0] - coarse.eigenvalues[0]) / 3.0;
        assert!((coarse.eigenvalues[0] - extrapolated).abs() <= 1e-6);
    }

    #[test]
    fn rayleigh_quotients_and_orthonormality() {
        let opts = OracleOptions {
            grid_points: 8192,
            ..OracleOptions::default()
        };
        let sol = fd_eigensolve(&PotentialSpec::morse(1.0, 12.0, 0.8), 1.0, None, 4, Boundary::Dirichlet, &opts).unwrap();
        for level in 0..4 {
            let rq = sol.rayleigh_quotient(level);
            assert_relative_eq!(rq, sol.raw_eigenvalues[level], max_relative = 1e-10);
            for other in 0..4 {
                let dot = sol.inner(&sol.eigenvectors[level], &sol.eigenvectors[other]);
                let expect = if level == other { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() <= 1e-8, "<{level}|{other}> = {dot}");
            }
        }
    }

    #[test]
    fn small_box_is_reported() {
        let err = fd_eigensolve(
            &PotentialSpec::harmonic(1.0, 1.0),
            1.0,
            Some((-2.0, 2.0)),
            3,
            Boundary::Dirichlet,
            &OracleOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BoxTooSmall { .. }), "{err:?}");
    }

    #[test]
    fn coarse_grid_is_reported() {
        let err = fd_eigensolve(
            &PotentialSpec::harmonic(1.0, 1.0),
            1.0,
            Some((-10.0, 10.0)),
            3,
            Boundary::Dirichlet,
            &OracleOptions {
                grid_points: 64,
                richardson: true,
                tolerance: 1e-9,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Resolution { .. }), "{err:?}");
    }

    #[test]
    fn asymmetric_periodic_potential_is_unsupported() {
        let err = fd_eigensolve(&PotentialSpec::pendulum(1.0, 1.0), 1.0, Some((0.5, 0.5 + TAU)), 2, Boundary::Periodic, &OracleOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn overlap_matched_and_unmatched() {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let sol = fd_eigensolve(&spec, 1.0, None, 1, Boundary::Dirichlet, &OracleOptions::default()).unwrap();
        let matched = ground_state_overlap(&spec, &CanonicalEnsemble::natural(1.0), &sol).unwrap();
        assert!(matched >= 1.0 - 1e-6, "{matched}");
        // Gaussians e^{-q^2} and e^{-q^2/2}: overlap 2 sqrt(ab)/(a+b) = 2√2/3
        let unmatched = ground_state_overlap(&spec, &CanonicalEnsemble::natural(2.0), &sol).unwrap();
        assert!((unmatched - 2.0 * 2.0_f64.sqrt() / 3.0).abs() < 1e-6, "{unmatched}");
    }
}
