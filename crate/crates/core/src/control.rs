//! Feedback laws for `<η²>` and the policies that hand a pump over to them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{FieldContext, FieldSource, FieldValue, ManyBodyState, Sample};
use crate::system::System;

/// Overshoot of `|<Q>|/Q_max` above 1 silently treated as round-off.
pub const CLAMP_SILENT: f64 = 1e-12;
/// Overshoot beyond which `Q_max` is considered wrong.
pub const CLAMP_LIMIT: f64 = 1e-9;
/// Magnitude below which a period-averaged drift counts as zero.
pub const ACTIVATION_NOISE_FLOOR: f64 = 1e-12;
pub const DEFAULT_DERIVATIVE_THRESHOLD: f64 = -1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    LyapunovUp,
    LyapunovDown,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActivationPolicy {
    /// Drift averaged over the trailing carrier period turns negative.
    WindowedAverage,
    /// Instantaneous drift below `threshold`.
    DerivativeThreshold {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    Fixed { t_act: f64 },
    /// First `t >= delay` with positive trailing-period drift; `delay`
    /// defaults to the double-pulse offset.
    PostDelayPositiveIntegral {
        #[serde(default)]
        delay: Option<f64>,
    },
}

fn default_threshold() -> f64 {
    DEFAULT_DERIVATIVE_THRESHOLD
}

impl ActivationPolicy {
    fn needs_history(&self) -> bool {
        !matches!(self, ActivationPolicy::Fixed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    pub mode: ControlMode,
    /// Target of the asymptotic law; defaults to `η²_max`.
    #[serde(default)]
    pub eta0_sq: Option<f64>,
    pub activation: ActivationPolicy,
}

impl ControlSpec {
    pub fn new(mode: ControlMode, activation: ActivationPolicy) -> Self {
        Self { mode, eta0_sq: None, activation }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta0_sq.is_some() && self.mode != ControlMode::Asymptotic {
            return Err(Error::Config("eta0_sq only applies to the asymptotic mode".into()));
        }
        if let Some(e) = self.eta0_sq {
            if !(e >= 0.0) {
                return Err(Error::Config(format!("eta0_sq must be nonnegative, got {e}")));
            }
        }
        match self.activation {
            ActivationPolicy::Fixed { t_act } if t_act.is_nan() => {
                Err(Error::Config("t_act must be a number".into()))
            }
            ActivationPolicy::DerivativeThreshold { threshold } if !threshold.is_finite() => {
                Err(Error::Config("derivative threshold must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// `|x| <= 1` after the floating-point guard.
pub fn clamp_unit(x: f64) -> Result<f64> {
    let a = x.abs();
    if a <= 1.0 {
        return Ok(x);
    }
    if a > 1.0 + CLAMP_LIMIT || a.is_nan() {
        return Err(Error::StaleQMax(a));
    }
    if a > 1.0 + CLAMP_SILENT {
        log::warn!("control argument overshoots 1 by {:e}; clamping", a - 1.0);
    }
    Ok(x.signum())
}

/// `arcsin(<Q>/Q_max)`
pub fn lyapunov_phi(q: f64, q_max: f64) -> Result<f64> {
    Ok(clamp_unit(ratio(q, q_max)?)?.asin())
}

/// `-arcsin(<Q>/Q_max)`
pub fn suppress_phi(q: f64, q_max: f64) -> Result<f64> {
    Ok(-lyapunov_phi(q, q_max)?)
}

/// `-arcsin(<Q>(<η²> - η₀²) / (Q_max η²_max))`
pub fn asymptotic_phi(q: f64, eta2: f64, q_max: f64, eta_sq_max: f64, eta0_sq: f64) -> Result<f64> {
    let x = ratio(q * (eta2 - eta0_sq), q_max * eta_sq_max)?;
    Ok(-clamp_unit(x)?.asin())
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > 0.0) {
        return Err(Error::InvalidArgument(format!("normalization must be positive, got {den}")));
    }
    Ok(num / den)
}

/// A control mode bound to the extreme eigenvalues of one system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlLaw {
    pub mode: ControlMode,
    pub q_max: f64,
    pub eta_sq_max: f64,
    pub eta0_sq: f64,
}

impl ControlLaw {
    pub fn new(spec: &ControlSpec, system: &System) -> Result<Self> {
        spec.validate()?;
        let eta0_sq = spec.eta0_sq.unwrap_or(system.eta_sq_max);
        if eta0_sq > system.eta_sq_max * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "eta0_sq = {eta0_sq} exceeds the largest eigenvalue {} of eta^2",
                system.eta_sq_max
            )));
        }
        Ok(Self { mode: spec.mode, q_max: system.q_max, eta_sq_max: system.eta_sq_max, eta0_sq })
    }

    /// Field from `<Q>` and `<η²>` of the current state.
    pub fn phi(&self, q: f64, eta2: f64) -> Result<f64> {
        match self.mode {
            ControlMode::LyapunovUp => lyapunov_phi(q, self.q_max),
            ControlMode::LyapunovDown => suppress_phi(q, self.q_max),
            ControlMode::Asymptotic => asymptotic_phi(q, eta2, self.q_max, self.eta_sq_max, self.eta0_sq),
        }
    }

    pub fn phi_for_state(&self, system: &System, state: &ManyBodyState) -> Result<f64> {
        let q = crate::operators::expectation(&system.q, state)?.re;
        let eta2 = crate::operators::expectation(&system.eta.eta_sq, state)?.re;
        self.phi(q, eta2)
    }
}

/// Constants an activation decision depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActivationParams {
    /// Length of the trailing window, `T_p`.
    pub period: f64,
    pub hopping: f64,
    /// Default delay of [`ActivationPolicy::PostDelayPositiveIntegral`].
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    NotYet,
    ActivateAt(f64),
}

/// `t_h/T_p ∫ sin(Φ) <Q> dt` over `[t - T_p, t]` by the trapezoid rule on
/// the recorded grid, the point at `t` included.
pub fn windowed_drift(history: &[Sample], t: f64, phi: f64, q: f64, params: &ActivationParams) -> Result<f64> {
    let from = t - params.period * (1.0 + 1e-9);
    let start = history.partition_point(|s| s.t < from);
    let covered = history.first().map_or(false, |s| s.t <= t - params.period * (1.0 - 1e-9));
    if !covered {
        return Err(Error::InsufficientHistory {
            needed: (params.period / (t - history.first().map_or(t, |s| s.t)).max(1e-300)).ceil() as usize,
            available: history.len(),
        });
    }
    let points = history[start..]
        .iter()
        .map(|s| (s.t, s.phi.sin() * s.q_expect))
        .chain(std::iter::once((t, phi.sin() * q)));
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for (tk, yk) in points {
        if let Some((tp, yp)) = prev {
            integral += 0.5 * (tk - tp) * (yk + yp);
        }
        prev = Some((tk, yk));
    }
    Ok(params.hopping * integral / params.period)
}

/// Decides whether control takes over at `t`, given the earlier samples,
/// the field `phi` the pump would apply at `t` and `q = <Q>(t)`.
pub fn activation_check(
    history: &[Sample],
    t: f64,
    phi: f64,
    q: f64,
    policy: &ActivationPolicy,
    params: &ActivationParams,
) -> Result<Activation> {
    let fire = |cond: bool| if cond { Activation::ActivateAt(t) } else { Activation::NotYet };
    if policy.needs_history() {
        windowed_drift(history, t, phi, q, params)?;
    }
    Ok(match *policy {
        ActivationPolicy::Fixed { t_act } => fire(t >= t_act - 1e-9 * params.period),
        ActivationPolicy::WindowedAverage => {
            fire(windowed_drift(history, t, phi, q, params)? < -ACTIVATION_NOISE_FLOOR)
        }
        ActivationPolicy::DerivativeThreshold { threshold } => fire(params.hopping * phi.sin() * q < threshold),
        ActivationPolicy::PostDelayPositiveIntegral { delay } => {
            let delay = delay.unwrap_or(params.delay);
            fire(t >= delay - 1e-9 * params.period
                && windowed_drift(history, t, phi, q, params)? > ACTIVATION_NOISE_FLOOR)
        }
    })
}

/// Latching activation tracker usable outside a field source.
#[derive(Debug, Clone)]
pub struct ActivationMonitor {
    policy: ActivationPolicy,
    params: ActivationParams,
    history: Vec<Sample>,
    fired: Option<f64>,
}

impl ActivationMonitor {
    pub fn new(policy: ActivationPolicy, params: ActivationParams) -> Self {
        Self { policy, params, history: Vec::new(), fired: None }
    }

    /// Feeds the next sample, whose `phi` is the pump field; returns true
    /// exactly once, at the activation step.
    pub fn observe(&mut self, sample: &Sample) -> Result<bool> {
        let mut now = false;
        if self.fired.is_none() {
            match activation_check(&self.history, sample.t, sample.phi, sample.q_expect, &self.policy, &self.params) {
                Ok(Activation::ActivateAt(t)) => {
                    self.fired = Some(t);
                    now = true;
                }
                Ok(Activation::NotYet) | Err(Error::InsufficientHistory { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        self.history.push(*sample);
        Ok(now)
    }

    pub fn activation_time(&self) -> Option<f64> {
        self.fired
    }
}

/// Pump before activation, feedback law after; the switch is latched.
pub struct ConcatenatedSource<P> {
    pump: P,
    law: ControlLaw,
    policy: ActivationPolicy,
    params: ActivationParams,
    t_act: Option<f64>,
}

impl<P: FieldSource> ConcatenatedSource<P> {
    pub fn new(pump: P, law: ControlLaw, policy: ActivationPolicy, params: ActivationParams) -> Self {
        Self { pump, law, policy, params, t_act: None }
    }

    /// A source already switched at `t_act`, for continuing a run from the
    /// state at activation.
    pub fn latched(pump: P, law: ControlLaw, policy: ActivationPolicy, params: ActivationParams, t_act: f64) -> Self {
        Self { pump, law, policy, params, t_act: Some(t_act) }
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }
}

impl<P: FieldSource> FieldSource for ConcatenatedSource<P> {
    fn is_closed_loop(&self) -> bool {
        true
    }

    fn field(&mut self, ctx: &FieldContext<'_>) -> Result<FieldValue> {
        if self.t_act.is_none() {
            let pump = self.pump.field(ctx)?.phi;
            match activation_check(ctx.history, ctx.t, pump, ctx.q, &self.policy, &self.params) {
                Ok(Activation::ActivateAt(t)) => self.t_act = Some(t),
                Ok(Activation::NotYet) | Err(Error::InsufficientHistory { .. }) => {
                    return Ok(FieldValue::open(pump));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(FieldValue { phi: self.law.phi(ctx.q, ctx.eta2)?, control_active: true })
    }

    fn activation_time(&self) -> Option<f64> {
        self.t_act
    }

    fn period(&self) -> Option<f64> {
        self.pump.period()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": "concatenated",
            "pump": self.pump.describe(),
            "mode": self.law.mode,
            "eta0_sq": self.law.eta0_sq,
            "q_max": self.law.q_max,
            "eta_sq_max": self.law.eta_sq_max,
            "activation": self.policy,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn sample(t: f64, phi: f64, q: f64) -> Sample {
        Sample { t, phi, eta2_per_l: 0.0, q_expect: q, norm: 1.0, control_active: false }
    }

    fn params() -> ActivationParams {
        ActivationParams { period: 1.0, hopping: 1.0, delay: 3.0 }
    }

    #[test]
    fn laws_at_special_points() {
        assert_eq!(lyapunov_phi(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(lyapunov_phi(5.0, 5.0).unwrap(), FRAC_PI_2);
        assert_eq!(lyapunov_phi(5.0 * (1.0 + 5e-13), 5.0).unwrap(), FRAC_PI_2);
        assert!(matches!(lyapunov_phi(5.0 * (1.0 + 1e-6), 5.0), Err(Error::StaleQMax(_))));
        for q in [-4.9, -1.0, 0.3, 2.2] {
            assert_eq!(lyapunov_phi(q, 5.0).unwrap() + suppress_phi(q, 5.0).unwrap(), 0.0);
        }
        assert_eq!(asymptotic_phi(3.0, 7.0, 5.0, 20.0, 7.0).unwrap(), 0.0);
        assert_eq!(asymptotic_phi(0.0, 1.0, 5.0, 20.0, 7.0).unwrap(), 0.0);
        assert!(asymptotic_phi(1.0, 2.0, 5.0, 20.0, 20.0).unwrap() > 0.0);
    }

    #[test]
    fn zero_history_never_activates() {
        let hist: Vec<Sample> = (0..200).map(|k| sample(k as f64 * 0.02, 0.0, 0.0)).collect();
        for policy in [
            ActivationPolicy::WindowedAverage,
            ActivationPolicy::DerivativeThreshold { threshold: -1e-3 },
            ActivationPolicy::PostDelayPositiveIntegral { delay: None },
        ] {
            assert_eq!(activation_check(&hist, 4.0, 0.0, 0.0, &policy, &params()).unwrap(), Activation::NotYet);
        }
    }

    #[test]
    fn windowed_average_fires_on_negative_drift() {
        let hist: Vec<Sample> = (0..100).map(|k| sample(k as f64 * 0.02, -0.1, 1.0)).collect();
        let res = activation_check(&hist, 2.0, -0.1, 1.0, &ActivationPolicy::WindowedAverage, &params());
        assert_eq!(res.unwrap(), Activation::ActivateAt(2.0));
        let drift = windowed_drift(&hist, 2.0, -0.1, 1.0, &params()).unwrap();
        assert!((drift - (-0.1f64).sin()).abs() < 1e-12);
        let short = &hist[..10];
        assert!(matches!(
            activation_check(short, 0.2, 0.1, 1.0, &ActivationPolicy::WindowedAverage, &params()),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn post_delay_waits_for_delay() {
        let hist: Vec<Sample> = (0..300).map(|k| sample(k as f64 * 0.01, 0.2, 1.0)).collect();
        let p = ActivationPolicy::PostDelayPositiveIntegral { delay: None };
        assert_eq!(activation_check(&hist[..250], 2.5, 0.2, 1.0, &p, &params()).unwrap(), Activation::NotYet);
        assert_eq!(activation_check(&hist, 3.0, 0.2, 1.0, &p, &params()).unwrap(), Activation::ActivateAt(3.0));
    }

    #[test]
    fn monitor_latches_once() {
        let mut m = ActivationMonitor::new(ActivationPolicy::Fixed { t_act: 0.5 }, params());
        let fired: Vec<bool> = (0..100).map(|k| m.observe(&sample(k as f64 * 0.01, 0.0, 0.0)).unwrap()).collect();
        assert_eq!(fired.iter().filter(|&&f| f).count(), 1);
        assert!((m.activation_time().unwrap() - 0.5).abs() < 1e-12);
    }
}
