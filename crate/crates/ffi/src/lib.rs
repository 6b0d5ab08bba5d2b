//! C ABI over `etapair`.
//!
//! Objects are opaque heap handles returned through out-pointers and
//! released by the matching `*_free`. Every fallible call returns an
//! [`EtapairStatus`]; on failure the message is available from
//! [`etapair_last_error`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use etapair::cli::run_evolution;
use etapair::config::RunConfig;
use etapair::control::{ActivationPolicy, ControlMode, ControlSpec};
use etapair::evolution::{ground_state, ManyBodyState, Trajectory};
use etapair::pulses::PulseSpec;
use etapair::system::{System, SystemParams};
use etapair::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtapairStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Numerical = 4,
    Cache = 5,
    Io = 6,
    OutOfRange = 7,
    Panic = 99,
}

/// Feedback law applied after activation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtapairControl {
    None = 0,
    LyapunovUp = 1,
    LyapunovDown = 2,
    Asymptotic = 3,
}

/// sin²-envelope pump pulse.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EtapairPulse {
    pub omega_p: f64,
    pub phi0: f64,
    pub n_p: u32,
    pub t_l: f64,
    pub t_r: f64,
}

/// One recorded time step.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct EtapairSample {
    pub t: f64,
    pub phi: f64,
    pub eta2_per_l: f64,
    pub q: f64,
    pub norm: f64,
    pub control_active: bool,
}

pub struct EtapairSystem(System);
pub struct EtapairState(ManyBodyState);
pub struct EtapairTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(err: &Error) -> EtapairStatus {
    match err {
        Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. }
        | Error::EmptySector { .. }
        | Error::OddRing(_) => EtapairStatus::InvalidArgument,
        Error::Config(_) => EtapairStatus::Config,
        Error::Cache { .. } => EtapairStatus::Cache,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => EtapairStatus::Io,
        _ => EtapairStatus::Numerical,
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (EtapairStatus, String)>) -> EtapairStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            EtapairStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EtapairStatus::Panic
        }
    }
}

fn lift<T>(r: etapair::Result<T>) -> Result<T, (EtapairStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (EtapairStatus, String) {
    (EtapairStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (EtapairStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<T>(p: *mut *mut T, what: &str) -> Result<&mut *mut T, (EtapairStatus, String)> {
    let slot = p.as_mut().ok_or_else(|| null(what))?;
    *slot = ptr::null_mut();
    Ok(slot)
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, (EtapairStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (EtapairStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn etapair_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Half-filled chain with `sites` sites. `cache_dir` may be null.
///
/// # Safety
/// `cache_dir` is null or a NUL-terminated string; `out_system` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_system_new(
    sites: u32,
    interaction: f64,
    hopping: f64,
    cache_dir: *const c_char,
    out_system: *mut *mut EtapairSystem,
) -> EtapairStatus {
    guard(|| {
        let slot = out(out_system, "out_system")?;
        let dir = if cache_dir.is_null() { None } else { Some(Path::new(string(cache_dir, "cache_dir")?)) };
        let params = SystemParams::new(sites as usize, interaction, hopping);
        let sys = lift(System::build(params, dir))?;
        *slot = Box::into_raw(Box::new(EtapairSystem(sys)));
        Ok(())
    })
}

/// # Safety
/// `system` is null or came from [`etapair_system_new`] and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn etapair_system_free(system: *mut EtapairSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Hilbert-space dimension, or 0 for a null handle.
///
/// # Safety
/// `system` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn etapair_system_dim(system: *const EtapairSystem) -> usize {
    system.as_ref().map_or(0, |s| s.0.dim())
}

/// Largest `|λ|` of `Q` and largest eigenvalue of `η²`.
///
/// # Safety
/// `system` is a live handle; the out pointers are null or writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_system_extremes(
    system: *const EtapairSystem,
    q_max: *mut f64,
    eta_sq_max: *mut f64,
) -> EtapairStatus {
    guard(|| {
        let s = &deref(system, "system")?.0;
        if let Some(q) = q_max.as_mut() {
            *q = s.q_max;
        }
        if let Some(e) = eta_sq_max.as_mut() {
            *e = s.eta_sq_max;
        }
        Ok(())
    })
}

/// Ground state of the field-free Hamiltonian.
///
/// # Safety
/// `system` is a live handle; `out_state` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_ground_state(
    system: *const EtapairSystem,
    energy: *mut f64,
    out_state: *mut *mut EtapairState,
) -> EtapairStatus {
    guard(|| {
        let s = &deref(system, "system")?.0;
        let slot = out(out_state, "out_state")?;
        let (e, psi) = lift(ground_state(s))?;
        if let Some(e_out) = energy.as_mut() {
            *e_out = e;
        }
        *slot = Box::into_raw(Box::new(EtapairState(psi)));
        Ok(())
    })
}

/// # Safety
/// `state` is null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn etapair_state_free(state: *mut EtapairState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// `<η²>/L` of `state`.
///
/// # Safety
/// Handles are live; `out_value` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_state_eta2_per_l(
    system: *const EtapairSystem,
    state: *const EtapairState,
    out_value: *mut f64,
) -> EtapairStatus {
    guard(|| {
        let s = &deref(system, "system")?.0;
        let psi = &deref(state, "state")?.0;
        let slot = out_value.as_mut().ok_or_else(|| null("out_value"))?;
        if psi.dim() != s.dim() {
            return Err((EtapairStatus::InvalidArgument, "state does not belong to system".into()));
        }
        *slot = s.eta.eta_sq.quadratic_form(psi.amplitudes()).re / s.sites() as f64;
        Ok(())
    })
}

fn trajectory_from(cfg: &RunConfig, sys: &System) -> etapair::Result<(Trajectory, ManyBodyState)> {
    let report = run_evolution(cfg, sys)?;
    Ok((report.evolution.trajectory, report.evolution.state))
}

/// Evolves the ground state under `pulse`, optionally handing over to
/// `control` with the default activation rule of that law (windowed
/// average for enhancement and the asymptotic law, post-delay integral for
/// suppression). `out_state` may be null.
///
/// # Safety
/// Handles and `pulse` are valid; `out_trajectory` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_evolve_pulse(
    system: *const EtapairSystem,
    pulse: *const EtapairPulse,
    control: EtapairControl,
    out_trajectory: *mut *mut EtapairTrajectory,
    out_state: *mut *mut EtapairState,
) -> EtapairStatus {
    guard(|| {
        let s = &deref(system, "system")?.0;
        let p = *deref(pulse, "pulse")?;
        let slot = out(out_trajectory, "out_trajectory")?;
        let mut cfg = RunConfig {
            system: s.params,
            pulse: PulseSpec { omega_p: p.omega_p, phi0: p.phi0, n_p: p.n_p, t_l: p.t_l, t_r: p.t_r },
            ..RunConfig::default()
        };
        cfg.control = match control {
            EtapairControl::None => None,
            EtapairControl::LyapunovUp => {
                Some(ControlSpec::new(ControlMode::LyapunovUp, ActivationPolicy::WindowedAverage))
            }
            EtapairControl::Asymptotic => {
                Some(ControlSpec::new(ControlMode::Asymptotic, ActivationPolicy::WindowedAverage))
            }
            EtapairControl::LyapunovDown => Some(ControlSpec::new(
                ControlMode::LyapunovDown,
                ActivationPolicy::PostDelayPositiveIntegral { delay: None },
            )),
        };
        lift(cfg.validate())?;
        let (traj, state) = lift(trajectory_from(&cfg, s))?;
        *slot = Box::into_raw(Box::new(EtapairTrajectory(traj)));
        if let Some(st) = out_state.as_mut() {
            *st = Box::into_raw(Box::new(EtapairState(state)));
        }
        Ok(())
    })
}

/// Runs the evolution described by a TOML run configuration, on `system`
/// (whose parameters must match the `[system]` block).
///
/// # Safety
/// `system` is live, `config_toml` is NUL-terminated, `out_trajectory` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_evolve_config(
    system: *const EtapairSystem,
    config_toml: *const c_char,
    out_trajectory: *mut *mut EtapairTrajectory,
) -> EtapairStatus {
    guard(|| {
        let s = &deref(system, "system")?.0;
        let text = string(config_toml, "config_toml")?;
        let slot = out(out_trajectory, "out_trajectory")?;
        let cfg = lift(RunConfig::from_toml(text))?;
        if cfg.system != s.params {
            return Err((EtapairStatus::Config, "[system] block does not match the system handle".into()));
        }
        let (traj, _) = lift(trajectory_from(&cfg, s))?;
        *slot = Box::into_raw(Box::new(EtapairTrajectory(traj)));
        Ok(())
    })
}

/// # Safety
/// `trajectory` is null or a live handle not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn etapair_trajectory_free(trajectory: *mut EtapairTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// Number of samples, or 0 for a null handle.
///
/// # Safety
/// `trajectory` is null or live.
#[no_mangle]
pub unsafe extern "C" fn etapair_trajectory_len(trajectory: *const EtapairTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.samples.len())
}

/// # Safety
/// `trajectory` is live; `out_sample` is writable.
#[no_mangle]
pub unsafe extern "C" fn etapair_trajectory_sample(
    trajectory: *const EtapairTrajectory,
    index: usize,
    out_sample: *mut EtapairSample,
) -> EtapairStatus {
    guard(|| {
        let t = &deref(trajectory, "trajectory")?.0;
        let slot = out_sample.as_mut().ok_or_else(|| null("out_sample"))?;
        let s = t.samples.get(index).ok_or_else(|| {
            (EtapairStatus::OutOfRange, format!("index {index} >= length {}", t.samples.len()))
        })?;
        *slot = EtapairSample {
            t: s.t,
            phi: s.phi,
            eta2_per_l: s.eta2_per_l,
            q: s.q_expect,
            norm: s.norm,
            control_active: s.control_active,
        };
        Ok(())
    })
}

/// Activation time of the feedback law; NaN when it never activated.
///
/// # Safety
/// `trajectory` is null or live.
#[no_mangle]
pub unsafe extern "C" fn etapair_trajectory_t_act(trajectory: *const EtapairTrajectory) -> f64 {
    trajectory.as_ref().and_then(|t| t.0.meta.t_act).unwrap_or(f64::NAN)
}
