use proptest::prelude::*;

use qbridge::bohr_sommerfeld::{action, classify_motion, quantize, MotionKind};
use qbridge::model::{find_equilibria, CanonicalEnsemble, PotentialSpec, Stability};
use qbridge::propagator::{classical_action, classical_trajectory, harmonic_action, kernel_phase, sliced_phase};
use qbridge::thermo::{thermo_profile, Normalization};
use qbridge::wigner::{CharacteristicFunction, PdeForm};

fn confining() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (0.3f64..3.0, 0.3f64..3.0).prop_map(|(m, w)| PotentialSpec::harmonic(m, w)),
        (0.3f64..3.0, 0.2f64..4.0).prop_map(|(m, l)| PotentialSpec::quartic(m, l)),
        (0.5f64..2.0, 10.0f64..40.0, 0.5f64..1.5).prop_map(|(m, d, a)| PotentialSpec::morse(m, d, a)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn equilibria_are_stationary(c2 in 0.1f64..2.0, c4 in 0.05f64..1.0) {
        // double well c4 q^4 - c2 q^2
        let spec = PotentialSpec::polynomial(1.0, vec![0.0, 0.0, -c2, 0.0, c4]);
        let points = find_equilibria(&spec, (-5.0, 5.0), 1e-12).unwrap();
        prop_assert_eq!(points.len(), 3);
        for p in &points {
            prop_assert!(spec.eval(p.q0).unwrap().slope.abs() <= 1e-9);
        }
        prop_assert_eq!(points[1].stability, Stability::Maximum);
    }

    #[test]
    fn characteristic_function_is_even_and_peaked(spec in confining(), beta in 1.5f64..4.0, q in -0.5f64..0.5, dq in 0.0f64..1.0) {
        let rho = CharacteristicFunction::new(&CanonicalEnsemble::natural(beta), &spec).unwrap();
        let plus = rho.closed_form(q, dq).unwrap().value.re;
        let minus = rho.closed_form(q, -dq).unwrap().value.re;
        let diagonal = rho.closed_form(q, 0.0).unwrap().value.re;
        prop_assert_eq!(plus, minus);
        prop_assert!(plus <= diagonal);
        let numeric = rho.quadrature(q, dq).unwrap().value;
        prop_assert!((numeric.re - plus).abs() <= 1e-8 * plus);
        prop_assert!(numeric.im.abs() <= 1e-8 * plus);
        let r = rho.pde_residual(q, dq, PdeForm::Corrected).unwrap();
        prop_assert!(r.abs() <= 1e-12 * plus.max(f64::MIN_POSITIVE) * (1.0 + dq));
    }

    #[test]
    fn free_energy_identities(spec in confining(), beta in 0.5f64..3.0, k_b in 0.5f64..2.0) {
        let ens = CanonicalEnsemble::natural(beta).with_k_b(k_b);
        let grid: Vec<f64> = (0..21).map(|i| -0.4 + 0.04 * i as f64).collect();
        let p = thermo_profile(&spec, &ens, &grid, Normalization::Paper).unwrap();
        for i in 0..grid.len() {
            prop_assert!((p.free_energy[i] + p.temperature * p.entropy[i]).abs() <= 1e-12 * p.free_energy[i].abs().max(1e-300));
            prop_assert!((p.free_energy[i] - p.potential[i]).abs() <= 1e-12 * p.potential[i].abs().max(1e-300));
        }
    }

    #[test]
    fn action_increases_with_energy(spec in confining(), fractions in proptest::collection::vec(0.01f64..0.9, 8)) {
        let top = spec.dissociation_energy().unwrap_or(20.0);
        let mut energies: Vec<f64> = fractions.iter().map(|f| f * top).collect();
        energies.sort_by(f64::total_cmp);
        energies.dedup();
        let mut last = 0.0;
        for e in energies {
            let class = classify_motion(&spec, e).unwrap();
            prop_assert_eq!(class.kind, MotionKind::Libration);
            let j = action(&spec, e, &class).unwrap().action;
            prop_assert!(j > last);
            last = j;
        }
    }

    #[test]
    fn harmonic_spectrum_for_any_units(m in 0.2f64..5.0, omega in 0.2f64..5.0, hbar in 0.1f64..2.0) {
        let s = quantize(&PotentialSpec::harmonic(m, omega), None, 0..=4, hbar).unwrap();
        for level in &s.levels {
            let exact = (level.n as f64 + 0.5) * hbar * omega;
            prop_assert!((level.e_bs - exact).abs() <= 1e-9 * exact);
        }
    }

    #[test]
    fn free_sliced_phase_is_exact(m in 0.2f64..5.0, q_a in -3.0f64..3.0, q_b in -3.0f64..3.0, t in 0.1f64..4.0, n in 1usize..500) {
        let spec = PotentialSpec::free(m);
        let traj = classical_trajectory(&spec, q_a, q_b, t, n).unwrap();
        let exact = m * (q_b - q_a).powi(2) / (2.0 * t);
        let phase = sliced_phase(&traj, &spec, 0.0, 1.0).unwrap();
        prop_assert!((phase.s_cl - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn harmonic_action_matches_two_point_formula(q_a in -2.0f64..2.0, q_b in -2.0f64..2.0, t in 0.2f64..2.8) {
        let spec = PotentialSpec::harmonic(1.0, 1.0);
        let traj = classical_trajectory(&spec, q_a, q_b, t, 4000).unwrap();
        let exact = harmonic_action(1.0, 1.0, q_a, q_b, t);
        prop_assert!((classical_action(&traj, &spec) - exact).abs() <= 1e-6 * exact.abs().max(1.0));
        let k = kernel_phase(&spec, q_a, q_b, t, Some(0.0), 1.0).unwrap();
        prop_assert!((k.total_phase - exact).abs() <= 1e-10 * exact.abs().max(1.0));
    }
}
