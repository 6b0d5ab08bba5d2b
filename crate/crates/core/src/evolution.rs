//! Time-dependent Schrödinger propagation under open- or closed-loop fields.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{extremal_eigenpair, LanczosOptions, Which};
use crate::linalg::{dot, norm};
use crate::propagator::{Propagator, Scheme};
use crate::system::System;

/// Normalized amplitude vector at time `t` (units of `1/t_h`).
#[derive(Debug, Clone, PartialEq)]
pub struct ManyBodyState {
    amplitudes: Vec<Complex64>,
    time: f64,
}

impl ManyBodyState {
    pub fn new(amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        let n = norm(&amplitudes);
        if (n - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!("state norm {n} differs from 1")));
        }
        Ok(Self { amplitudes, time })
    }

    /// Normalizes `amplitudes`.
    pub fn normalized(mut amplitudes: Vec<Complex64>, time: f64) -> Result<Self> {
        let n = norm(&amplitudes);
        if n == 0.0 || !n.is_finite() {
            return Err(Error::InvalidArgument("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(Self { amplitudes, time })
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Self { amplitudes, time: 0.0 }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    pub fn overlap(&self, other: &Self) -> Complex64 {
        dot(&self.amplitudes, &other.amplitudes)
    }

    /// `|<self|other>|²`
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.overlap(other).norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagatorConfig {
    /// Time step; `None` means `dt_fraction * T_p` of the pump.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_dt_fraction")]
    pub dt_fraction: f64,
    /// Step used when no pump defines a period.
    #[serde(default = "default_fallback_dt")]
    pub fallback_dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_dt_fraction() -> f64 {
    0.02
}

fn default_fallback_dt() -> f64 {
    0.01
}

fn default_tolerance() -> f64 {
    1e-10
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: None,
            dt_fraction: default_dt_fraction(),
            fallback_dt: default_fallback_dt(),
            scheme: Scheme::default(),
            tolerance: default_tolerance(),
        }
    }
}

impl PropagatorConfig {
    /// Step for a run driven by a pump of period `period`.
    pub fn step_for(&self, period: Option<f64>) -> f64 {
        self.dt
            .unwrap_or_else(|| period.map_or(self.fallback_dt, |p| self.dt_fraction * p))
    }

    pub fn validate(&self) -> Result<()> {
        let dt_ok = self.dt.map_or(true, |d| d > 0.0 && d.is_finite());
        if !dt_ok || self.dt_fraction <= 0.0 || self.fallback_dt <= 0.0 {
            return Err(Error::Config("time step must be positive".into()));
        }
        if self.tolerance <= 0.0 {
            return Err(Error::Config("propagator tolerance must be positive".into()));
        }
        match self.scheme {
            Scheme::KrylovExpm { max_subspace } if max_subspace < 2 => {
                Err(Error::Config("krylov subspace must hold at least 2 vectors".into()))
            }
            Scheme::ChebyExpm { max_order } if max_order < 2 => {
                Err(Error::Config("chebyshev order must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Field applied on `[t, t + dt)`.
    pub phi: f64,
    pub eta2_per_l: f64,
    /// `Re <Q>`
    pub q_expect: f64,
    pub norm: f64,
    pub control_active: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub sites: usize,
    pub interaction: f64,
    pub hopping: f64,
    pub dt: f64,
    pub t_start: f64,
    pub t_final: f64,
    /// Description of the field source.
    pub source: serde_json::Value,
    pub t_act: Option<f64>,
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory is never empty")
    }

    pub fn final_eta2_per_l(&self) -> f64 {
        self.last().eta2_per_l
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn fields(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.phi).collect()
    }

    /// Samples with `t` in `[from, to]`.
    pub fn between(&self, from: f64, to: f64) -> impl Iterator<Item = &Sample> {
        self.samples.iter().filter(move |s| s.t >= from && s.t <= to)
    }
}

/// Everything a field rule may look at when choosing `Φ(t_n)`.
pub struct FieldContext<'a> {
    pub t: f64,
    pub step: usize,
    pub dt: f64,
    pub state: &'a ManyBodyState,
    /// `<η²>` of `state`.
    pub eta2: f64,
    /// `Re <Q>` of `state`.
    pub q: f64,
    /// Every earlier step, oldest first.
    pub history: &'a [Sample],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub phi: f64,
    pub control_active: bool,
}

impl FieldValue {
    pub fn open(phi: f64) -> Self {
        Self { phi, control_active: false }
    }
}

/// Rule producing the Peierls phase at each step.
pub trait FieldSource {
    /// Open-loop sources must ignore the state and history.
    fn is_closed_loop(&self) -> bool;

    fn field(&mut self, ctx: &FieldContext<'_>) -> Result<FieldValue>;

    /// Handover time to a feedback law, once it happened.
    fn activation_time(&self) -> Option<f64> {
        None
    }

    /// Carrier period used to derive the default time step.
    fn period(&self) -> Option<f64> {
        None
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

impl<S: FieldSource + ?Sized> FieldSource for Box<S> {
    fn is_closed_loop(&self) -> bool {
        (**self).is_closed_loop()
    }
    fn field(&mut self, ctx: &FieldContext<'_>) -> Result<FieldValue> {
        (**self).field(ctx)
    }
    fn activation_time(&self) -> Option<f64> {
        (**self).activation_time()
    }
    fn period(&self) -> Option<f64> {
        (**self).period()
    }
    fn describe(&self) -> serde_json::Value {
        (**self).describe()
    }
}

/// `Φ ≡ 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl FieldSource for ZeroField {
    fn is_closed_loop(&self) -> bool {
        false
    }
    fn field(&mut self, _: &FieldContext<'_>) -> Result<FieldValue> {
        Ok(FieldValue::open(0.0))
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "zero" })
    }
}

/// Lowest eigenpair of `H(0)`, with residual `||Hψ - εψ|| <= 1e-9`.
pub fn ground_state(system: &System) -> Result<(f64, ManyBodyState)> {
    let fam = &system.family;
    let opts = LanczosOptions { subspace: 80, max_restarts: 60, tolerance: 1e-10, seed: 0x9e37 };
    let pair = extremal_eigenpair(|x, y| fam.apply(0.0, x, y), fam.dim(), Which::Lowest, opts)?;
    let mut v = pair.vector;
    // Fix the global phase: largest component real and positive.
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    let rot = pivot.conj() / pivot.norm();
    v.iter_mut().for_each(|a| *a *= rot);
    Ok((pair.value, ManyBodyState::normalized(v, 0.0)?))
}

/// Single step `exp(-i H(Φ) dt)` with a fresh workspace.
pub fn step(
    state: &ManyBodyState,
    phi: f64,
    dt: f64,
    system: &System,
    config: &PropagatorConfig,
) -> Result<ManyBodyState> {
    let mut prop = Propagator::new(state.dim(), config.scheme, config.tolerance);
    let mut amps = state.amplitudes.clone();
    prop.step(&mut amps, phi, dt, &system.family)?;
    Ok(ManyBodyState { amplitudes: amps, time: state.time + dt })
}

/// Result of [`evolve_full`]: the recorded trajectory and the final state.
pub struct Evolution {
    pub trajectory: Trajectory,
    pub state: ManyBodyState,
}

/// Integrates from `t0` to `t1` and records every `record_every`-th step
/// (the first and last points are always kept).
pub fn evolve<S: FieldSource + ?Sized>(
    initial: &ManyBodyState,
    source: &mut S,
    t0: f64,
    t1: f64,
    system: &System,
    config: &PropagatorConfig,
    record_every: usize,
) -> Result<Trajectory> {
    evolve_full(initial, source, t0, t1, system, config, record_every).map(|e| e.trajectory)
}

/// [`evolve`], also returning the final state.
pub fn evolve_full<S: FieldSource + ?Sized>(
    initial: &ManyBodyState,
    source: &mut S,
    t0: f64,
    t1: f64,
    system: &System,
    config: &PropagatorConfig,
    record_every: usize,
) -> Result<Evolution> {
    evolve_observed(initial, source, t0, t1, system, config, record_every, |_, _| Ok(()))
}

/// [`evolve_full`] with a callback invoked after each sample is formed,
/// before the step is taken, with the state at that sample.
#[allow(clippy::too_many_arguments)]
pub fn evolve_observed<S, F>(
    initial: &ManyBodyState,
    source: &mut S,
    t0: f64,
    t1: f64,
    system: &System,
    config: &PropagatorConfig,
    record_every: usize,
    mut observer: F,
) -> Result<Evolution>
where
    S: FieldSource + ?Sized,
    F: FnMut(&Sample, &ManyBodyState) -> Result<()>,
{
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("empty time interval [{t0}, {t1}]")));
    }
    if initial.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), actual: initial.dim() });
    }
    config.validate()?;
    let record_every = record_every.max(1);
    let dt = config.step_for(source.period());
    let span = t1 - t0;
    let mut n_steps = (span / dt).round() as usize;
    if (n_steps as f64) * dt < span * (1.0 - 1e-12) {
        n_steps += 1;
    }
    let n_steps = n_steps.max(1);
    let sites = system.basis.sites() as f64;

    let mut prop = Propagator::new(system.dim(), config.scheme, config.tolerance);
    let mut state = initial.clone().with_time(t0);
    let mut history: Vec<Sample> = Vec::with_capacity(n_steps + 1);

    for n in 0..=n_steps {
        let t = if n == n_steps { t1 } else { t0 + n as f64 * dt };
        state.time = t;
        let eta2 = system.eta.eta_sq.quadratic_form(&state.amplitudes).re;
        let q = system.q.quadratic_form(&state.amplitudes).re;
        let ctx = FieldContext { t, step: n, dt, state: &state, eta2, q, history: &history };
        let field = source.field(&ctx)?;
        let sample = Sample {
            t,
            phi: field.phi,
            eta2_per_l: eta2 / sites,
            q_expect: q,
            norm: state.norm(),
            control_active: field.control_active,
        };
        observer(&sample, &state)?;
        history.push(sample);
        if n < n_steps {
            let h = if n + 1 == n_steps { t1 - t } else { dt };
            prop.step(&mut state.amplitudes, field.phi, h, &system.family)?;
        }
    }

    let last = history.len() - 1;
    let samples = history
        .into_iter()
        .enumerate()
        .filter(|(k, _)| k % record_every == 0 || *k == last)
        .map(|(_, s)| s)
        .collect();
    let meta = TrajectoryMeta {
        sites: system.basis.sites(),
        interaction: system.family.interaction(),
        hopping: system.family.hopping(),
        dt,
        t_start: t0,
        t_final: t1,
        source: source.describe(),
        t_act: source.activation_time(),
        record_every,
    };
    Ok(Evolution { trajectory: Trajectory { samples, meta }, state })
}
