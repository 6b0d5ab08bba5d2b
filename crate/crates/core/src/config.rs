//! TOML run configuration and the built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::StftParams;
use crate::control::{ActivationPolicy, ControlMode, ControlSpec};
use crate::error::{Error, Result};
use crate::pulses::{Drive, PulseSpec};
use crate::scan::{linspace_step, Direction, EngineConfig, GridSpec};
use crate::system::SystemParams;

/// Explicit list or inclusive `start..=stop` with `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl Values {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let v = match self {
            Values::List(v) => v.clone(),
            Values::Range { start, stop, step } => linspace_step(*start, *stop, *step)?,
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("value list must be nonempty and finite".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Spectrum and extreme-eigenvalue caches.
    #[serde(default = "default_cache")]
    pub cache_dir: PathBuf,
    /// Keep every n-th trajectory sample.
    #[serde(default = "one")]
    pub record_every: usize,
    /// Decompose the final state in the field-free eigenbasis.
    #[serde(default)]
    pub decompose: bool,
    #[serde(default = "default_weight_threshold")]
    pub weight_threshold: f64,
    /// Spectrogram of the realized field.
    #[serde(default)]
    pub stft: bool,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_cache() -> PathBuf {
    PathBuf::from("cache")
}

fn one() -> usize {
    1
}

fn default_weight_threshold() -> f64 {
    1e-12
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            cache_dir: default_cache(),
            record_every: 1,
            decompose: false,
            weight_threshold: default_weight_threshold(),
            stft: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub omega: Values,
    pub phi0: Values,
    /// Controlled variants evaluated per cell, sharing the uncontrolled prefix.
    #[serde(default)]
    pub controls: Vec<ControlSpec>,
}

impl ScanConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        Ok(GridSpec { omega: self.omega.expand()?, phi0: self.phi0.expand()? })
    }
}

impl Default for ScanConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { omega: Values::List(g.omega), phi0: Values::List(g.phi0), controls: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub t_act: Values,
    pub direction: Direction,
}

/// Optional overrides of the period-derived spectrogram defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub sigma: Option<f64>,
    pub width: Option<f64>,
    pub hop: Option<f64>,
    pub freq_min: Option<f64>,
    pub freq_max: Option<f64>,
    pub freq_step: Option<f64>,
}

impl StftConfig {
    pub fn params(&self, period: f64) -> StftParams {
        let mut p = StftParams::for_period(period);
        if let Some(v) = self.sigma {
            p.sigma = v;
        }
        if let Some(v) = self.width {
            p.width = v;
        }
        if let Some(v) = self.hop {
            p.hop = v;
        }
        if let Some(v) = self.freq_min {
            p.freq_min = v;
        }
        if let Some(v) = self.freq_max {
            p.freq_max = v;
        }
        if let Some(v) = self.freq_step {
            p.freq_step = v;
        }
        p
    }
}

/// Post-processing of the realized field, replayed open loop.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostConfig {
    /// Gaussian widths in units of `T_p`, applied on
    /// `[t_act - T_p/2, t_act + T_p/2]`.
    #[serde(default)]
    pub smoothing_sigmas: Vec<f64>,
    /// Switch-off intervals `[τ₁, τ₂]` relative to `t_f`.
    #[serde(default)]
    pub switch_off: Vec<[f64; 2]>,
    /// Keep the drive running this long past `t_f`.
    #[serde(default)]
    pub extended_horizon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub system: SystemParams,
    #[serde(default = "default_pulse")]
    pub pulse: PulseSpec,
    #[serde(default)]
    pub drive: Drive,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub post: PostConfig,
}

fn default_pulse() -> PulseSpec {
    PulseSpec::new(19.1, 0.2)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: SystemParams::default(),
            pulse: default_pulse(),
            drive: Drive::Single,
            control: None,
            engine: EngineConfig::default(),
            output: OutputConfig::default(),
            scan: None,
            sweep: None,
            stft: StftConfig::default(),
            post: PostConfig::default(),
        }
    }
}

pub const PRESETS: [&str; 7] = ["fig1b", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"];

fn lc(activation: ActivationPolicy) -> ControlSpec {
    ControlSpec::new(ControlMode::LyapunovUp, activation)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn preset(name: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        let windowed = ActivationPolicy::WindowedAverage;
        match name {
            // resonant uncontrolled pulse
            "fig1b" => {
                c.output.decompose = true;
            }
            "fig2" => {
                c.scan = Some(ScanConfig {
                    controls: vec![
                        lc(windowed),
                        ControlSpec { eta0_sq: Some(20.0), ..ControlSpec::new(ControlMode::Asymptotic, windowed) },
                    ],
                    ..ScanConfig::default()
                });
            }
            "fig3" => {
                c.pulse = PulseSpec::new(18.0, 0.2);
                c.control = Some(lc(windowed));
                c.output.decompose = true;
                c.output.stft = true;
            }
            "fig4" => {
                c.pulse = PulseSpec::new(17.0, 0.4);
                c.control = Some(lc(windowed));
                let tf = c.pulse.final_time();
                c.sweep = Some(SweepConfig {
                    t_act: Values::Range { start: c.pulse.t_l, stop: tf, step: 0.25 },
                    direction: Direction::Max,
                });
            }
            // "fig5b" names the sweep panel of the same run
            "fig5" | "fig5b" => {
                c.drive = Drive::Double;
                c.control = Some(ControlSpec::new(
                    ControlMode::LyapunovDown,
                    ActivationPolicy::PostDelayPositiveIntegral { delay: None },
                ));
                let delay = c.pulse.repeat_delay();
                c.sweep = Some(SweepConfig {
                    t_act: Values::Range { start: delay, stop: delay + c.pulse.final_time(), step: 0.25 },
                    direction: Direction::Min,
                });
            }
            "fig6" => {
                c.pulse = PulseSpec::new(18.0, 0.2);
                c.control = Some(lc(windowed));
                c.post.smoothing_sigmas = vec![0.05, 0.1, 0.2];
            }
            "fig7" => {
                c.pulse = PulseSpec::new(18.0, 0.2);
                c.control = Some(lc(windowed));
                c.post.extended_horizon = Some(30.0);
                c.post.switch_off = vec![[-5.0, 0.0], [0.0, 5.0], [5.0, 15.0]];
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset {other:?}; available: {}",
                    PRESETS.join(", ")
                )))
            }
        }
        c.validate()?;
        Ok(c)
    }

    /// Checks everything that can be checked without building operators.
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        self.pulse.validate()?;
        self.engine.propagator.validate()?;
        if let Some(c) = &self.control {
            c.validate()?;
        }
        if self.output.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        if let Some(s) = &self.scan {
            s.grid()?;
            for c in &s.controls {
                c.validate()?;
            }
        }
        if let Some(s) = &self.sweep {
            let horizon = self.drive.final_time(&self.pulse);
            if s.t_act.expand()?.iter().any(|&t| t < 0.0 || t > horizon) {
                return Err(Error::Config(format!("sweep t_act values must lie in [0, {horizon}]")));
            }
        }
        if self.post.smoothing_sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("smoothing sigmas must be positive".into()));
        }
        if self.post.switch_off.iter().any(|[a, b]| !(b > a)) {
            return Err(Error::Config("switch-off intervals need t2 > t1".into()));
        }
        if let Some(h) = self.post.extended_horizon {
            if !(h >= 0.0 && h.is_finite()) {
                return Err(Error::Config("extended horizon must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// End of the simulated window, including any extension.
    pub fn horizon(&self) -> f64 {
        self.drive.final_time(&self.pulse) + self.post.extended_horizon.unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let c = RunConfig::preset(name).unwrap();
            let text = c.to_toml().unwrap();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), c, "{name}");
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[pulse]\nomega_p = 19.1\nphi0 = 0.2\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml("colour = 3\n").is_err());
    }

    #[test]
    fn parses_minimal_file() {
        let c = RunConfig::from_toml(
            r#"
            [system]
            L = 4
            U = 10.0
            [pulse]
            omega_p = 12.0
            phi0 = 0.1
            [control]
            mode = "lyapunov_up"
            activation = { kind = "fixed", t_act = 3.0 }
            [scan]
            omega = { start = 10.0, stop = 11.0, step = 0.5 }
            phi0 = [0.1, 0.2]
            "#,
        )
        .unwrap();
        assert_eq!(c.system.sites, 4);
        assert_eq!(c.scan.unwrap().grid().unwrap().omega, vec![10.0, 10.5, 11.0]);
    }
}
