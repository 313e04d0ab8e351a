//! Phase-space and semiclassical bridges between classical mechanics and
//! quantum amplitudes for one-dimensional potentials.
//!
//! - [`model`]: potential families, canonical ensembles, equilibrium points.
//! - [`wigner`]: the equilibrium characteristic function and its checks.
//! - [`thermo`]: curvature-matched temperatures, entropy and free energy.
//! - [`bohr_sommerfeld`]: action integrals and the quantization rule.
//! - [`propagator`]: classical paths and the phase of the sliced kernel.
//! - [`oracle`]: finite-difference eigenpairs used as ground truth.
//!
//! Units are natural by default (`ħ = k_B = m = 1`); every entry point takes
//! `ħ` explicitly where it matters.
//!
//! ```
//! use qbridge::model::PotentialSpec;
//! use qbridge::bohr_sommerfeld::quantize;
//!
//! let spectrum = quantize(&PotentialSpec::harmonic(1.0, 1.0), None, 0..=2, 1.0).unwrap();
//! let energies: Vec<f64> = spectrum.levels.iter().map(|l| l.e_bs).collect();
//! assert!((energies[2] - 2.5).abs() < 1e-9);
//! ```

pub mod bohr_sommerfeld;
pub mod error;
pub mod model;
pub mod oracle;
pub mod propagator;
pub mod quadrature;
pub mod thermo;
mod tridiagonal;
pub mod wigner;

pub use error::{Error, Result};
