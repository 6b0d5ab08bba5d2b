//! Parameter grids over `(ω_p, Φ₀)` and activation-time sweeps.
//!
//! Every controlled run shares its pump-driven prefix with the uncontrolled
//! run of the same pump: the uncontrolled trajectory is integrated once and
//! each controlled run continues from the state at its activation time.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::control::{ActivationMonitor, ActivationParams, ActivationPolicy, ConcatenatedSource, ControlLaw, ControlSpec};
use crate::error::{Error, Result};
use crate::evolution::{evolve_full, evolve_observed, ManyBodyState, PropagatorConfig};
use crate::pulses::{Drive, PulseSource, PulseSpec};
use crate::system::System;

/// `start, start + step, ...` up to `stop` inclusive, rounded to 12 digits.
pub fn linspace_step(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(stop >= start) {
        return Err(Error::Config(format!("bad range {start}..={stop} step {step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub omega: Vec<f64>,
    pub phi0: Vec<f64>,
}

impl Default for GridSpec {
    /// `ω_p` in `[15, 25]` step 0.1, `Φ₀` in `[0.05, 0.60]` step 0.05.
    fn default() -> Self {
        Self {
            omega: linspace_step(15.0, 25.0, 0.1).expect("valid range"),
            phi0: linspace_step(0.05, 0.60, 0.05).expect("valid range"),
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.omega.len() * self.phi0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell `k` in ω-major order.
    pub fn cell(&self, k: usize) -> (f64, f64) {
        (self.omega[k / self.phi0.len()], self.phi0[k % self.phi0.len()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default)]
    pub propagator: PropagatorConfig,
    /// Worker threads; 0 means one per available core.
    #[serde(default)]
    pub workers: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { propagator: PropagatorConfig::default(), workers: 0 }
    }
}

/// Outcome of one control spec within a cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlledResult {
    pub final_eta2_per_l: f64,
    /// `<η²>/L` at the activation step.
    pub eta2_at_act_per_l: Option<f64>,
    pub t_act: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub omega_p: f64,
    pub phi0: f64,
    pub max_eta2_per_l: f64,
    pub final_eta2_per_l: f64,
    /// One entry per control spec of the scan.
    pub controlled: Vec<ControlledResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub grid: GridSpec,
    pub controls: Vec<ControlSpec>,
    /// ω-major; failed cells carry the error message.
    pub cells: Vec<std::result::Result<CellResult, String>>,
}

impl ScanGrid {
    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.is_err()).count()
    }

    /// Cell with the largest controlled final value for control `which`.
    pub fn best_controlled(&self, which: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .filter_map(|c| c.as_ref().ok())
            .max_by(|a, b| a.controlled[which].final_eta2_per_l.total_cmp(&b.controlled[which].final_eta2_per_l))
    }

    /// Writes `omega_p, phi0, max_eta2_per_L, final_eta2_per_L,
    /// controlled_final_eta2_per_L, t_act` for control `which` (empty
    /// controlled columns without a control); failed cells get `NaN` and
    /// their error in a trailing `error` column.
    pub fn write_csv(&self, path: &Path, which: Option<usize>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "omega_p",
            "phi0",
            "max_eta2_per_L",
            "final_eta2_per_L",
            "controlled_final_eta2_per_L",
            "t_act",
            "error",
        ])?;
        for (k, cell) in self.cells.iter().enumerate() {
            let (om, p0) = self.grid.cell(k);
            let row = match cell {
                Ok(c) => {
                    let ctl = which.map(|i| c.controlled[i]);
                    [
                        fmt(om),
                        fmt(p0),
                        fmt(c.max_eta2_per_l),
                        fmt(c.final_eta2_per_l),
                        ctl.map_or(String::new(), |r| fmt(r.final_eta2_per_l)),
                        ctl.and_then(|r| r.t_act).map_or(String::new(), fmt),
                        String::new(),
                    ]
                }
                Err(e) => [
                    fmt(om),
                    fmt(p0),
                    "NaN".into(),
                    "NaN".into(),
                    "NaN".into(),
                    String::new(),
                    e.clone(),
                ],
            };
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt(v: f64) -> String {
    format!("{v}")
}

fn activation_params(system: &System, spec: &PulseSpec) -> ActivationParams {
    ActivationParams { period: spec.period(), hopping: system.family.hopping(), delay: spec.repeat_delay() }
}

/// Uncontrolled run of `spec`, plus the state at the first step where
/// each policy fires.
struct SharedPrefix {
    max_eta2_per_l: f64,
    final_eta2_per_l: f64,
    t_final: f64,
    /// Per policy: activation state and `<η²>/L` there.
    snapshots: Vec<Option<(ManyBodyState, f64)>>,
}

fn shared_prefix(
    system: &System,
    initial: &ManyBodyState,
    spec: &PulseSpec,
    drive: Drive,
    policies: &[ActivationPolicy],
    propagator: &PropagatorConfig,
) -> Result<SharedPrefix> {
    let params = activation_params(system, spec);
    let mut monitors: Vec<ActivationMonitor> = policies.iter().map(|p| ActivationMonitor::new(*p, params)).collect();
    let mut snapshots: Vec<Option<(ManyBodyState, f64)>> = vec![None; policies.len()];
    let mut max_eta2 = f64::NEG_INFINITY;
    let t_final = drive.final_time(spec);
    let mut source = PulseSource { spec: *spec, drive };
    let run = evolve_observed(initial, &mut source, 0.0, t_final, system, propagator, usize::MAX, |sample, state| {
        max_eta2 = max_eta2.max(sample.eta2_per_l);
        for (m, snap) in monitors.iter_mut().zip(snapshots.iter_mut()) {
            if m.observe(sample)? {
                *snap = Some((state.clone(), sample.eta2_per_l));
            }
        }
        Ok(())
    })?;
    Ok(SharedPrefix {
        max_eta2_per_l: max_eta2,
        final_eta2_per_l: run.trajectory.final_eta2_per_l(),
        t_final,
        snapshots,
    })
}

/// Continues from the activation state under the latched control law.
fn controlled_branch(
    system: &System,
    spec: &PulseSpec,
    drive: Drive,
    control: &ControlSpec,
    snapshot: &(ManyBodyState, f64),
    t_final: f64,
    uncontrolled_final: f64,
    propagator: &PropagatorConfig,
) -> Result<ControlledResult> {
    let (state, eta2_at_act) = snapshot;
    let t_act = state.time();
    if t_act >= t_final {
        return Ok(ControlledResult {
            final_eta2_per_l: uncontrolled_final,
            eta2_at_act_per_l: Some(*eta2_at_act),
            t_act: Some(t_act),
        });
    }
    let law = ControlLaw::new(control, system)?;
    let mut source = ConcatenatedSource::latched(
        PulseSource { spec: *spec, drive },
        law,
        control.activation,
        activation_params(system, spec),
        t_act,
    );
    let run = evolve_full(state, &mut source, t_act, t_final, system, propagator, usize::MAX)?;
    Ok(ControlledResult {
        final_eta2_per_l: run.trajectory.final_eta2_per_l(),
        eta2_at_act_per_l: Some(*eta2_at_act),
        t_act: Some(t_act),
    })
}

/// One grid cell: the uncontrolled run and every control spec.
pub fn run_cell(
    system: &System,
    initial: &ManyBodyState,
    spec: &PulseSpec,
    drive: Drive,
    controls: &[ControlSpec],
    propagator: &PropagatorConfig,
) -> Result<CellResult> {
    spec.validate()?;
    let mut policies: Vec<ActivationPolicy> = Vec::new();
    let slot: Vec<usize> = controls
        .iter()
        .map(|c| match policies.iter().position(|p| *p == c.activation) {
            Some(i) => i,
            None => {
                policies.push(c.activation);
                policies.len() - 1
            }
        })
        .collect();
    let prefix = shared_prefix(system, initial, spec, drive, &policies, propagator)?;
    let controlled = controls
        .iter()
        .zip(&slot)
        .map(|(c, &i)| match &prefix.snapshots[i] {
            Some(snap) => controlled_branch(
                system,
                spec,
                drive,
                c,
                snap,
                prefix.t_final,
                prefix.final_eta2_per_l,
                propagator,
            ),
            None => Ok(ControlledResult {
                final_eta2_per_l: prefix.final_eta2_per_l,
                eta2_at_act_per_l: None,
                t_act: None,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CellResult {
        omega_p: spec.omega_p,
        phi0: spec.phi0,
        max_eta2_per_l: prefix.max_eta2_per_l,
        final_eta2_per_l: prefix.final_eta2_per_l,
        controlled,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every cell of `grid` with `template` supplying `N_p`, `t_l`, `t_r`.
/// Results are stored by cell index, so they do not depend on scheduling.
pub fn run_grid_multi(
    system: &System,
    template: &PulseSpec,
    drive: Drive,
    controls: &[ControlSpec],
    grid: &GridSpec,
    engine: &EngineConfig,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Result<ScanGrid> {
    use rayon::prelude::*;
    for c in controls {
        ControlLaw::new(c, system)?;
    }
    engine.propagator.validate()?;
    let (_, initial) = crate::evolution::ground_state(system)?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let total = grid.len();
    let cells = pool(engine.workers)?.install(|| {
        (0..total)
            .into_par_iter()
            .map(|k| {
                let (omega_p, phi0) = grid.cell(k);
                let spec = PulseSpec { omega_p, phi0, ..*template };
                let res = run_cell(system, &initial, &spec, drive, controls, &engine.propagator)
                    .map_err(|e| e.to_string());
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if let Some(p) = progress {
                    p(n, total);
                }
                res
            })
            .collect::<Vec<_>>()
    });
    Ok(ScanGrid { grid: grid.clone(), controls: controls.to_vec(), cells })
}

pub fn run_grid(
    system: &System,
    template: &PulseSpec,
    control: Option<&ControlSpec>,
    grid: &GridSpec,
    engine: &EngineConfig,
) -> Result<ScanGrid> {
    let controls: Vec<ControlSpec> = control.into_iter().copied().collect();
    run_grid_multi(system, template, Drive::Single, &controls, grid, engine, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Max,
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub t_act: Vec<f64>,
    /// Final `<η²>/L` per activation time.
    pub final_eta2_per_l: Vec<f64>,
    pub uncontrolled_final: f64,
    /// Result of the reference policy.
    pub policy: ActivationPolicy,
    pub policy_final: f64,
    pub policy_t_act: Option<f64>,
    pub direction: Direction,
    /// `(t_act, value)` of the optimum.
    pub best: (f64, f64),
}

impl SweepCurve {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t_act", "final_eta2_per_L"])?;
        for (t, v) in self.t_act.iter().zip(&self.final_eta2_per_l) {
            w.write_record([fmt(*t), fmt(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

/// Fixed-activation sweep of `control.mode` over `t_act_values`; the
/// activation policy of `control` supplies the reference line.
pub fn activation_sweep(
    system: &System,
    spec: &PulseSpec,
    drive: Drive,
    control: &ControlSpec,
    t_act_values: &[f64],
    engine: &EngineConfig,
    direction: Direction,
) -> Result<SweepCurve> {
    use rayon::prelude::*;
    if t_act_values.is_empty() {
        return Err(Error::Config("activation sweep needs at least one t_act".into()));
    }
    spec.validate()?;
    ControlLaw::new(control, system)?;
    let (_, initial) = crate::evolution::ground_state(system)?;
    let t_final = drive.final_time(spec);
    let mut policies: Vec<ActivationPolicy> =
        t_act_values.iter().map(|&t_act| ActivationPolicy::Fixed { t_act }).collect();
    policies.push(control.activation);
    let prefix = shared_prefix(system, &initial, spec, drive, &policies, &engine.propagator)?;
    let branch = |snap: &Option<(ManyBodyState, f64)>, policy: ActivationPolicy| -> Result<ControlledResult> {
        let c = ControlSpec { activation: policy, ..*control };
        match snap {
            Some(s) => controlled_branch(
                system,
                spec,
                drive,
                &c,
                s,
                t_final,
                prefix.final_eta2_per_l,
                &engine.propagator,
            ),
            None => Ok(ControlledResult {
                final_eta2_per_l: prefix.final_eta2_per_l,
                eta2_at_act_per_l: None,
                t_act: None,
            }),
        }
    };
    let results: Vec<Result<ControlledResult>> = pool(engine.workers)?.install(|| {
        (0..policies.len())
            .into_par_iter()
            .map(|k| branch(&prefix.snapshots[k], policies[k]))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    let (reference, sweep) = results.split_last().expect("at least one policy");
    let values: Vec<f64> = sweep.iter().map(|r| r.final_eta2_per_l).collect();
    let pick = |a: f64, b: f64| match direction {
        Direction::Max => a > b,
        Direction::Min => a < b,
    };
    let mut best = (t_act_values[0], values[0]);
    for (&t, &v) in t_act_values.iter().zip(&values) {
        if pick(v, best.1) {
            best = (t, v);
        }
    }
    Ok(SweepCurve {
        t_act: t_act_values.to_vec(),
        final_eta2_per_l: values,
        uncontrolled_final: prefix.final_eta2_per_l,
        policy: control.activation,
        policy_final: reference.final_eta2_per_l,
        policy_t_act: reference.t_act,
        direction,
        best,
    })
}
