//! L = 4 evolutions against a brute-force integrator: dense matrix
//! exponential by scaling and squaring, same zero-order-hold grid.

mod common;

use common::{brute_force, fidelity};
use etapair::control::{ActivationParams, ActivationPolicy, ConcatenatedSource, ControlLaw, ControlMode, ControlSpec};
use etapair::evolution::{evolve_full, ground_state, ManyBodyState, PropagatorConfig};
use etapair::propagator::Scheme;
use etapair::pulses::{PulseSource, PulseSpec};
use etapair::system::{System, SystemParams};

fn setup() -> (System, ManyBodyState, PulseSpec) {
    let system = System::build(SystemParams::new(4, 20.0, 1.0), None).unwrap();
    let (_, gs) = ground_state(&system).unwrap();
    let spec = PulseSpec { omega_p: 15.0, phi0: 0.5, n_p: 10, t_l: 1.0, t_r: 1.0 };
    (system, gs, spec)
}

fn schemes() -> [PropagatorConfig; 2] {
    [
        PropagatorConfig::default(),
        PropagatorConfig { scheme: Scheme::ChebyExpm { max_order: 80 }, ..PropagatorConfig::default() },
    ]
}

#[test]
fn open_loop_pulse_matches_dense_exponential() {
    let (system, gs, spec) = setup();
    let t_end = spec.final_time();
    let oracle = brute_force(&system, gs.amplitudes(), &spec, t_end, None);
    for cfg in schemes() {
        let mut src = PulseSource::single(spec);
        let run = evolve_full(&gs, &mut src, 0.0, t_end, &system, &cfg, 1).unwrap();
        let f = fidelity(run.state.amplitudes(), &oracle);
        assert!(f >= 1.0 - 1e-8, "{:?}: fidelity {f}", cfg.scheme);
    }
}

#[test]
fn lyapunov_handover_matches_dense_exponential() {
    let (system, gs, spec) = setup();
    let t_end = spec.final_time();
    let t_act = 3.3;
    let oracle = brute_force(&system, gs.amplitudes(), &spec, t_end, Some(t_act));
    let control = ControlSpec::new(ControlMode::LyapunovUp, ActivationPolicy::Fixed { t_act });
    for cfg in schemes() {
        let law = ControlLaw::new(&control, &system).unwrap();
        let params = ActivationParams { period: spec.period(), hopping: 1.0, delay: spec.repeat_delay() };
        let mut src = ConcatenatedSource::new(PulseSource::single(spec), law, control.activation, params);
        let run = evolve_full(&gs, &mut src, 0.0, t_end, &system, &cfg, 1).unwrap();
        let f = fidelity(run.state.amplitudes(), &oracle);
        assert!(f >= 1.0 - 1e-8, "{:?}: fidelity {f}", cfg.scheme);
        let t_fired = run.trajectory.meta.t_act.unwrap();
        assert!(t_fired >= t_act && t_fired < t_act + 0.02 * spec.period() + 1e-12);
    }
}
