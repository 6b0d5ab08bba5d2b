use std::sync::OnceLock;

use etapair::analysis::{decompose, full_spectrum, Spectrum};
use etapair::cache::{self, CacheKey};
use etapair::control::{asymptotic_phi, lyapunov_phi, suppress_phi};
use etapair::evolution::{step, ManyBodyState, PropagatorConfig};
use etapair::propagator::Scheme;
use etapair::pulses::{pump_phi, switch_off_factor, PulseSpec};
use etapair::system::{System, SystemParams};
use num_complex::Complex64;
use proptest::prelude::*;

struct Fixture {
    system: System,
    spectrum: Spectrum,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let system = System::build(SystemParams::new(4, 8.0, 1.0), None).unwrap();
        let spectrum = full_spectrum(&system, None).unwrap();
        Fixture { system, spectrum }
    })
}

fn state_from(raw: &[(f64, f64)]) -> ManyBodyState {
    ManyBodyState::normalized(raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect(), 0.0).unwrap()
}

fn raw_state(dim: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim)
        .prop_filter("nonzero", |v| v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn steps_are_unitary_and_agree_across_schemes(raw in raw_state(36), phi in -1.5f64..1.5, dt in 1e-4f64..0.05) {
        let f = fixture();
        let psi = state_from(&raw);
        let a = step(&psi, phi, dt, &f.system, &PropagatorConfig::default()).unwrap();
        let cheb = PropagatorConfig { scheme: Scheme::ChebyExpm { max_order: 80 }, ..PropagatorConfig::default() };
        let b = step(&psi, phi, dt, &f.system, &cheb).unwrap();
        prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        prop_assert!(a.fidelity(&b) > 1.0 - 1e-12);
        // reversal
        let back = step(&a, phi, -dt, &f.system, &PropagatorConfig::default()).unwrap();
        prop_assert!(back.fidelity(&psi) > 1.0 - 1e-12);
    }

    #[test]
    fn weights_sum_to_one_and_reproduce_eta2(raw in raw_state(36)) {
        let f = fixture();
        let psi = state_from(&raw);
        let dec = decompose(&psi, &f.spectrum, 1e-12).unwrap();
        prop_assert!((dec.total - 1.0).abs() < 1e-8);
        let direct = f.system.eta.eta_sq.quadratic_form(psi.amplitudes()).re;
        prop_assert!((dec.mean_eta2 - direct).abs() < 1e-8);
    }

    #[test]
    fn hamiltonian_is_hermitian_and_phase_periodic(phi in -10.0f64..10.0) {
        let f = fixture();
        let h = f.system.family.hamiltonian(phi);
        prop_assert!(h.hermiticity_defect() < 1e-14);
        let h2 = f.system.family.hamiltonian(phi + 2.0 * std::f64::consts::PI);
        prop_assert!(h.sub(&h2).max_abs() < 1e-12);
    }

    #[test]
    fn fused_apply_matches_assembled_matrix(raw in raw_state(36), phi in -3.0f64..3.0) {
        let f = fixture();
        let x: Vec<Complex64> = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
        let mut y = vec![Complex64::new(0.0, 0.0); 36];
        f.system.family.apply(phi, &x, &mut y);
        let z = f.system.family.hamiltonian(phi).mul_vec(&x);
        for (a, b) in y.iter().zip(&z) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn control_laws_stay_on_the_principal_branch(q in -60.0f64..60.0, eta2 in 0.0f64..20.0, target in 0.0f64..20.0) {
        let q_max = 60.0;
        let up = lyapunov_phi(q, q_max).unwrap();
        let down = suppress_phi(q, q_max).unwrap();
        prop_assert_eq!(up + down, 0.0);
        prop_assert!(up.abs() <= std::f64::consts::FRAC_PI_2);
        prop_assert!(up * q >= 0.0);
        let ac = asymptotic_phi(q, eta2, q_max, 20.0, target).unwrap();
        prop_assert!(ac.abs() <= std::f64::consts::FRAC_PI_2);
        // sin(Φ)<Q>(<η²> - η₀²) <= 0 makes the distance to the target shrink
        prop_assert!(ac.sin() * q * (eta2 - target) <= 1e-15);
    }

    #[test]
    fn pump_is_bounded_and_vanishes_off_support(omega in 5.0f64..40.0, phi0 in 0.0f64..1.0, n_p in 1u32..80, t in -5.0f64..200.0) {
        let spec = PulseSpec { omega_p: omega, phi0, n_p, t_l: 5.0, t_r: 5.0 };
        let v = pump_phi(&spec, t);
        prop_assert!(v.abs() <= phi0 + 1e-15);
        let (a, b) = spec.support();
        if t < a || t > b {
            prop_assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn switch_off_factor_is_a_monotone_ramp(t1 in -10.0f64..10.0, width in 0.1f64..20.0, s in 0.0f64..1.0, ds in 0.0f64..0.5) {
        let t2 = t1 + width;
        let a = switch_off_factor(t1 + s * width, t1, t2);
        let b = switch_off_factor(t1 + (s + ds).min(1.0) * width, t1, t2);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-15);
    }

    #[test]
    fn cache_round_trips_any_payload(payload in prop::collection::vec(-1e300f64..1e300, 0..200), u in 0.0f64..50.0) {
        let dir = tempfile::tempdir().unwrap();
        let key = CacheKey { kind: "prop".into(), sites: 4, n_up: 2, n_down: 2, hopping: 1.0, interaction: u };
        let path = dir.path().join(key.file_name());
        cache::write(&path, &key, &payload).unwrap();
        let back = cache::read(&path, &key).unwrap().unwrap();
        prop_assert_eq!(back.payload, payload);
        let other = CacheKey { interaction: u + 1.0, ..key };
        prop_assert!(cache::read(&path, &other).is_err());
    }
}
