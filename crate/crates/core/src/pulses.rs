//! Open-loop field shapes and post-processing filters on sampled fields.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{FieldContext, FieldSource, FieldValue};

/// sin²-envelope pump with `N_p` carrier cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub phi0: f64,
    pub omega_p: f64,
    #[serde(default = "default_cycles")]
    pub n_p: u32,
    #[serde(default = "default_idle")]
    pub t_l: f64,
    #[serde(default = "default_idle")]
    pub t_r: f64,
}

fn default_cycles() -> u32 {
    54
}

fn default_idle() -> f64 {
    5.0
}

impl PulseSpec {
    pub fn new(omega_p: f64, phi0: f64) -> Self {
        Self { phi0, omega_p, n_p: default_cycles(), t_l: default_idle(), t_r: default_idle() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_p > 0.0 && self.omega_p.is_finite()) {
            return Err(Error::Config(format!("omega_p must be positive, got {}", self.omega_p)));
        }
        if self.n_p == 0 {
            return Err(Error::Config("n_p must be at least 1".into()));
        }
        if !self.phi0.is_finite() || self.t_l < 0.0 || self.t_r < 0.0 {
            return Err(Error::Config("phi0 must be finite and idle times nonnegative".into()));
        }
        Ok(())
    }

    /// `T_p = 2π / ω_p`
    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega_p
    }

    pub fn duration(&self) -> f64 {
        self.n_p as f64 * self.period()
    }

    /// `[t_l, t_l + N_p T_p]`
    pub fn support(&self) -> (f64, f64) {
        (self.t_l, self.t_l + self.duration())
    }

    /// `t_f = t_l + N_p T_p + t_r`
    pub fn final_time(&self) -> f64 {
        self.t_l + self.duration() + self.t_r
    }

    /// Offset of the second pulse of a double pulse.
    pub fn repeat_delay(&self) -> f64 {
        self.final_time()
    }
}

/// `Φ(t) = Φ₀ sin(ω_p τ) sin²(ω_p τ / 2N_p)` on the support, `τ = t - t_l`.
pub fn pump_phi(spec: &PulseSpec, t: f64) -> f64 {
    let tau = t - spec.t_l;
    if tau < 0.0 || tau > spec.duration() {
        return 0.0;
    }
    let w = spec.omega_p * tau;
    spec.phi0 * w.sin() * (w / (2.0 * spec.n_p as f64)).sin().powi(2)
}

/// Two identical pumps separated by `Δt = t_l + N_p T_p + t_r`.
pub fn double_pulse_phi(spec: &PulseSpec, t: f64) -> f64 {
    pump_phi(spec, t) + pump_phi(spec, t - spec.repeat_delay())
}

/// Uniformly sampled field `(t_k, Φ_k)`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FieldSamples {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
}

impl FieldSamples {
    pub fn new(t: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if t.len() != phi.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), actual: phi.len() });
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("sample times must increase strictly".into()));
        }
        Ok(Self { t, phi })
    }

    pub fn from_fn(t: Vec<f64>, f: impl Fn(f64) -> f64) -> Self {
        let phi = t.iter().map(|&x| f(x)).collect();
        Self { t, phi }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Mean spacing.
    pub fn spacing(&self) -> f64 {
        match self.t.len() {
            0 | 1 => 0.0,
            n => (self.t[n - 1] - self.t[0]) / (n - 1) as f64,
        }
    }

    /// Reads the `t` and `phi` columns of a CSV file with a header row.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Config(format!("{}: missing column '{name}'", path.display())))
        };
        let (ct, cp) = (col("t")?, col("phi")?);
        let mut t = Vec::new();
        let mut phi = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |c: usize| {
                rec.get(c)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("{}: bad number in row {}", path.display(), row + 2)))
            };
            t.push(parse(ct)?);
            phi.push(parse(cp)?);
        }
        Self::new(t, phi)
    }
}

fn gaussian(x: f64, sigma: f64) -> f64 {
    (-0.5 * (x / sigma).powi(2)).exp()
}

/// Gaussian smoothing restricted to `window`.
///
/// Inside the window each sample becomes the convolution with a Gaussian
/// truncated at `4σ` and renormalized over the available samples, blended
/// with the raw value by a tent weight that vanishes at the window edges.
pub fn gaussian_smooth(samples: &FieldSamples, sigma: f64, window: (f64, f64)) -> Result<FieldSamples> {
    let (ta, tb) = window;
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    if samples.is_empty() || !(tb > ta) || ta < samples.t[0] || tb > *samples.t.last().unwrap() {
        return Err(Error::InvalidArgument(format!("window [{ta}, {tb}] exceeds the samples")));
    }
    let reach = 4.0 * sigma;
    let centre = 0.5 * (ta + tb);
    let half = 0.5 * (tb - ta);
    let mut out = samples.clone();
    for (i, &ti) in samples.t.iter().enumerate() {
        if ti < ta || ti > tb {
            continue;
        }
        let lo = samples.t.partition_point(|&x| x < ti - reach);
        let hi = samples.t.partition_point(|&x| x <= ti + reach);
        let (mut num, mut den) = (0.0, 0.0);
        for k in lo..hi {
            let g = gaussian(samples.t[k] - ti, sigma);
            num += g * samples.phi[k];
            den += g;
        }
        let blend = 1.0 - (ti - centre).abs() / half;
        out.phi[i] = (1.0 - blend) * samples.phi[i] + blend * num / den;
    }
    Ok(out)
}

/// `Ξ(t)`: 1 before `t1`, `cos²(π/2 (t - t1)/(t2 - t1))` on `[t1, t2)`, 0 after.
pub fn switch_off_factor(t: f64, t1: f64, t2: f64) -> f64 {
    if t < t1 {
        1.0
    } else if t < t2 {
        (0.5 * PI * (t - t1) / (t2 - t1)).cos().powi(2)
    } else {
        0.0
    }
}

pub fn switch_off(samples: &FieldSamples, t1: f64, t2: f64) -> Result<FieldSamples> {
    if !(t2 > t1) {
        return Err(Error::InvalidArgument(format!("switch-off needs t2 > t1, got [{t1}, {t2}]")));
    }
    let mut out = samples.clone();
    for (p, &t) in out.phi.iter_mut().zip(&samples.t) {
        *p *= switch_off_factor(t, t1, t2);
    }
    Ok(out)
}

/// Single pump or the same pump repeated after `Δt`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drive {
    #[default]
    Single,
    Double,
}

impl Drive {
    pub fn phi(&self, spec: &PulseSpec, t: f64) -> f64 {
        match self {
            Drive::Single => pump_phi(spec, t),
            Drive::Double => double_pulse_phi(spec, t),
        }
    }

    /// Measurement time: `t_f`, or `Δt + t_f` for the double pulse.
    pub fn final_time(&self, spec: &PulseSpec) -> f64 {
        match self {
            Drive::Single => spec.final_time(),
            Drive::Double => spec.repeat_delay() + spec.final_time(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PulseSource {
    pub spec: PulseSpec,
    pub drive: Drive,
}

impl PulseSource {
    pub fn single(spec: PulseSpec) -> Self {
        Self { spec, drive: Drive::Single }
    }

    pub fn double(spec: PulseSpec) -> Self {
        Self { spec, drive: Drive::Double }
    }
}

impl FieldSource for PulseSource {
    fn is_closed_loop(&self) -> bool {
        false
    }
    fn field(&mut self, ctx: &FieldContext<'_>) -> Result<FieldValue> {
        Ok(FieldValue::open(self.drive.phi(&self.spec, ctx.t)))
    }
    fn period(&self) -> Option<f64> {
        Some(self.spec.period())
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "pulse", "drive": self.drive, "pulse": self.spec })
    }
}

/// Replays recorded samples with a zero-order hold; zero outside them.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    samples: FieldSamples,
    period: Option<f64>,
}

impl ReplaySource {
    /// `period` fixes the default step so a replay reproduces the original grid.
    pub fn new(samples: FieldSamples, period: Option<f64>) -> Self {
        Self { samples, period }
    }

    pub fn samples(&self) -> &FieldSamples {
        &self.samples
    }

    pub fn value_at(&self, t: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() || t < s.t[0] - 1e-9 * s.spacing().max(1.0) {
            return 0.0;
        }
        // Tolerate round-off in the time grid of the replaying run.
        let slack = 1e-6 * s.spacing();
        let k = s.t.partition_point(|&x| x <= t + slack);
        if k == 0 {
            0.0
        } else if k == s.len() && t > s.t[k - 1] + s.spacing() {
            0.0
        } else {
            s.phi[k - 1]
        }
    }
}

impl FieldSource for ReplaySource {
    fn is_closed_loop(&self) -> bool {
        false
    }
    fn field(&mut self, ctx: &FieldContext<'_>) -> Result<FieldValue> {
        Ok(FieldValue::open(self.value_at(ctx.t)))
    }
    fn period(&self) -> Option<f64> {
        self.period
    }
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "replay", "samples": self.samples.len() })
    }
}
