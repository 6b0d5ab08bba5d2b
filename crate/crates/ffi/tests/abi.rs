use std::ffi::{CStr, CString};
use std::ptr;

use etapair_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(etapair_last_error()) }.to_string_lossy().into_owned()
}

fn small_system() -> *mut EtapairSystem {
    let mut sys = ptr::null_mut();
    let st = unsafe { etapair_system_new(4, 10.0, 1.0, ptr::null(), &mut sys) };
    assert_eq!(st, EtapairStatus::Ok, "{}", last_error());
    sys
}

#[test]
fn system_ground_state_and_extremes() {
    let sys = small_system();
    assert_eq!(unsafe { etapair_system_dim(sys) }, 36);
    let (mut q, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { etapair_system_extremes(sys, &mut q, &mut e) }, EtapairStatus::Ok);
    // η(η+1) with η = L/2 = 2
    assert!((e - 6.0).abs() < 1e-9, "{e}");
    assert!(q > 0.0);
    let mut psi = ptr::null_mut();
    let mut energy = 0.0;
    assert_eq!(unsafe { etapair_ground_state(sys, &mut energy, &mut psi) }, EtapairStatus::Ok);
    assert!(energy < 0.0);
    let mut v = f64::NAN;
    assert_eq!(unsafe { etapair_state_eta2_per_l(sys, psi, &mut v) }, EtapairStatus::Ok);
    assert!(v.abs() < 1e-10);
    unsafe {
        etapair_state_free(psi);
        etapair_system_free(sys);
    }
}

#[test]
fn pulse_and_controlled_runs() {
    let sys = small_system();
    let pulse = EtapairPulse { omega_p: 9.0, phi0: 0.3, n_p: 6, t_l: 1.0, t_r: 1.0 };
    let mut open = ptr::null_mut();
    let mut state = ptr::null_mut();
    let st = unsafe { etapair_evolve_pulse(sys, &pulse, EtapairControl::None, &mut open, &mut state) };
    assert_eq!(st, EtapairStatus::Ok, "{}", last_error());
    let n = unsafe { etapair_trajectory_len(open) };
    assert!(n > 100);
    let mut last = EtapairSample::default();
    assert_eq!(unsafe { etapair_trajectory_sample(open, n - 1, &mut last) }, EtapairStatus::Ok);
    assert!((last.norm - 1.0).abs() < 1e-8);
    let mut end = f64::NAN;
    assert_eq!(unsafe { etapair_state_eta2_per_l(sys, state, &mut end) }, EtapairStatus::Ok);
    assert!((end - last.eta2_per_l).abs() < 1e-12);
    assert!(unsafe { etapair_trajectory_t_act(open) }.is_nan());

    let mut ctl = ptr::null_mut();
    let st = unsafe { etapair_evolve_pulse(sys, &pulse, EtapairControl::LyapunovUp, &mut ctl, ptr::null_mut()) };
    assert_eq!(st, EtapairStatus::Ok, "{}", last_error());
    let mut s = EtapairSample::default();
    let m = unsafe { etapair_trajectory_len(ctl) };
    unsafe { etapair_trajectory_sample(ctl, m - 1, &mut s) };
    if unsafe { etapair_trajectory_t_act(ctl) }.is_finite() {
        assert!(s.control_active);
    }
    let mut bad = EtapairSample::default();
    assert_eq!(unsafe { etapair_trajectory_sample(ctl, m, &mut bad) }, EtapairStatus::OutOfRange);
    unsafe {
        etapair_trajectory_free(open);
        etapair_trajectory_free(ctl);
        etapair_state_free(state);
        etapair_system_free(sys);
    }
}

#[test]
fn config_runs_and_mismatch_is_rejected() {
    let sys = small_system();
    let good = CString::new(
        "[system]\nL = 4\nU = 10.0\n[pulse]\nomega_p = 9.0\nphi0 = 0.2\nn_p = 4\nt_l = 1.0\nt_r = 1.0\n",
    )
    .unwrap();
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { etapair_evolve_config(sys, good.as_ptr(), &mut traj) }, EtapairStatus::Ok, "{}", last_error());
    assert!(unsafe { etapair_trajectory_len(traj) } > 10);
    unsafe { etapair_trajectory_free(traj) };

    let other = CString::new("[system]\nL = 6\nU = 10.0\n").unwrap();
    let mut traj = ptr::null_mut();
    assert_eq!(unsafe { etapair_evolve_config(sys, other.as_ptr(), &mut traj) }, EtapairStatus::Config);
    assert!(traj.is_null());
    let junk = CString::new("nonsense = = 1").unwrap();
    assert_eq!(unsafe { etapair_evolve_config(sys, junk.as_ptr(), &mut traj) }, EtapairStatus::Config);
    assert!(!last_error().is_empty());
    unsafe { etapair_system_free(sys) };
}

#[test]
fn errors_are_reported_not_raised() {
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { etapair_system_new(5, 10.0, 1.0, ptr::null(), &mut sys) }, EtapairStatus::InvalidArgument);
    assert!(sys.is_null());
    assert!(last_error().contains("odd"), "{}", last_error());
    assert_eq!(unsafe { etapair_system_new(4, 10.0, 1.0, ptr::null(), ptr::null_mut()) }, EtapairStatus::NullPointer);
    assert_eq!(unsafe { etapair_system_extremes(ptr::null(), ptr::null_mut(), ptr::null_mut()) }, EtapairStatus::NullPointer);
    assert_eq!(unsafe { etapair_system_dim(ptr::null()) }, 0);
    assert_eq!(unsafe { etapair_trajectory_len(ptr::null()) }, 0);
    unsafe {
        etapair_system_free(ptr::null_mut());
        etapair_state_free(ptr::null_mut());
        etapair_trajectory_free(ptr::null_mut());
    }
    let s = small_system();
    let bad = EtapairPulse { omega_p: -1.0, phi0: 0.2, n_p: 4, t_l: 1.0, t_r: 1.0 };
    let mut traj = ptr::null_mut();
    assert_eq!(
        unsafe { etapair_evolve_pulse(s, &bad, EtapairControl::None, &mut traj, ptr::null_mut()) },
        EtapairStatus::Config
    );
    unsafe { etapair_system_free(s) };
}

#[test]
fn header_declares_the_api_and_compiles() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/etapair.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "etapair_system_new",
        "etapair_ground_state",
        "etapair_evolve_pulse",
        "etapair_evolve_config",
        "etapair_trajectory_sample",
        "etapair_last_error",
        "ETAPAIR_STATUS_OK",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
    // Syntax check with the system C compiler when there is one.
    if let Ok(out) = std::process::Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).output() {
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
