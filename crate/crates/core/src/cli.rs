//! Command-line front end. The binary only calls [`main`]; the command
//! functions are public so tests and other front ends can drive them.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use rand::{Rng, SeedableRng};

use crate::analysis::{decompose, full_spectrum, stft, trajectory_summary, Spectrogram};
use crate::config::{RunConfig, PRESETS};
use crate::control::{ActivationParams, ConcatenatedSource, ControlLaw};
use crate::error::{Error, Result};
use crate::evolution::{evolve_full, evolve_observed, ground_state, Evolution, FieldSource};
use crate::io::{self, Manifest};
use crate::pulses::{gaussian_smooth, switch_off, FieldSamples, PulseSource, ReplaySource};
use crate::scan::{activation_sweep, run_grid_multi, ScanGrid};
use crate::system::System;

#[derive(Debug, Parser)]
#[command(name = "etapair", version, about = "Driven Hubbard chain: η-pairing under pump pulses and feedback control")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Built-in configuration (fig1b, fig2, fig3, fig4, fig5, fig6, fig7).
    #[arg(long, global = true, value_name = "NAME")]
    pub preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Cache directory for spectra and operator extremes.
    #[arg(long, global = true, value_name = "DIR")]
    pub cache_dir: Option<PathBuf>,
    /// Scan and sweep worker threads (0: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Seed for synthetic test signals.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Continue the drive this long past the final time.
    #[arg(long, global = true, value_name = "T")]
    pub extended_horizon: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Field-free spectrum with η² per eigenstate.
    Spectrum,
    /// One evolution, with optional decomposition, spectrogram and filters.
    Evolve,
    /// Grid over (ω_p, Φ₀).
    Scan,
    /// Final order parameter against a fixed activation time.
    Sweep,
    /// Spectrogram of a field file or a synthetic sinusoid.
    Stft(StftArgs),
    /// Print the resolved configuration as TOML.
    Config,
}

#[derive(Debug, Clone, Args)]
pub struct StftArgs {
    /// CSV with `t` and `phi` columns.
    #[arg(long, value_name = "PATH", conflicts_with = "synthetic_omega")]
    pub input: Option<PathBuf>,
    /// Use a unit sinusoid with this angular frequency and a seeded phase.
    #[arg(long, value_name = "OMEGA")]
    pub synthetic_omega: Option<f64>,
    /// Length of the synthetic signal.
    #[arg(long, default_value_t = 40.0)]
    pub duration: f64,
}

/// Config from `--preset` or `--config` (not both), with flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match (&cli.preset, &cli.config) {
        (Some(_), Some(_)) => return Err(Error::Config("--preset and --config are mutually exclusive".into())),
        (Some(p), None) => RunConfig::preset(p)?,
        (None, Some(path)) => RunConfig::load(path)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.output.dir = o.clone();
    }
    if let Some(c) = &cli.cache_dir {
        cfg.output.cache_dir = c.clone();
    }
    if let Some(w) = cli.workers {
        cfg.engine.workers = w;
    }
    if let Some(h) = cli.extended_horizon {
        cfg.post.extended_horizon = Some(h);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(cfg: &RunConfig) -> Result<System> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    std::fs::create_dir_all(&cfg.output.cache_dir)?;
    let t = Instant::now();
    let system = System::build(cfg.system, Some(&cfg.output.cache_dir))?;
    info!(
        "system L={} dim={} Q_max={} eta2_max={} ({:.1}s)",
        system.sites(),
        system.dim(),
        system.q_max,
        system.eta_sq_max,
        t.elapsed().as_secs_f64()
    );
    Ok(system)
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Manifest> {
    let start = Instant::now();
    let system = prepare(cfg)?;
    let spectrum = full_spectrum(&system, Some(&cfg.output.cache_dir))?;
    let mut m = Manifest::new("spectrum", cfg)?;
    let path = cfg.output.dir.join("spectrum.csv");
    io::write_spectrum(&path, &spectrum)?;
    m.outputs.push(path);
    m.caches = system.caches.clone();
    m.caches.extend(spectrum.cache.clone());
    m.summary = serde_json::json!({
        "states": spectrum.dim(),
        "ground_energy": spectrum.energies.first(),
        "top_energy": spectrum.energies.last(),
    });
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

/// A replayed variant of the realized field.
pub struct Variant {
    pub label: String,
    pub field: FieldSamples,
    pub evolution: Evolution,
}

/// Output of [`run_evolution`].
pub struct EvolveReport {
    pub evolution: Evolution,
    /// Field at every step, independent of the recording cadence.
    pub field: FieldSamples,
    pub t_act: Option<f64>,
    pub t_final: f64,
    pub variants: Vec<Variant>,
}

fn pump(cfg: &RunConfig) -> PulseSource {
    PulseSource { spec: cfg.pulse, drive: cfg.drive }
}

fn source_for(cfg: &RunConfig, system: &System) -> Result<Box<dyn FieldSource>> {
    Ok(match &cfg.control {
        None => Box::new(pump(cfg)),
        Some(c) => {
            let params = ActivationParams {
                period: cfg.pulse.period(),
                hopping: system.family.hopping(),
                delay: cfg.pulse.repeat_delay(),
            };
            Box::new(ConcatenatedSource::new(pump(cfg), ControlLaw::new(c, system)?, c.activation, params))
        }
    })
}

/// The configured evolution from the ground state, followed by one open-loop
/// replay per smoothing width and per switch-off interval.
pub fn run_evolution(cfg: &RunConfig, system: &System) -> Result<EvolveReport> {
    let (_, initial) = ground_state(system)?;
    let horizon = cfg.horizon();
    let mut source = source_for(cfg, system)?;
    let (mut t, mut phi) = (Vec::new(), Vec::new());
    let evolution = evolve_observed(
        &initial,
        &mut source,
        0.0,
        horizon,
        system,
        &cfg.engine.propagator,
        cfg.output.record_every,
        |s, _| {
            t.push(s.t);
            phi.push(s.phi);
            Ok(())
        },
    )?;
    let field = FieldSamples::new(t, phi)?;
    let t_act = source.activation_time();
    let t_final = cfg.drive.final_time(&cfg.pulse);
    let period = cfg.pulse.period();

    let mut variants = Vec::new();
    let mut replay = |label: String, field: FieldSamples| -> Result<()> {
        let mut src = ReplaySource::new(field.clone(), Some(period));
        let evolution = evolve_full(
            &initial,
            &mut src,
            0.0,
            horizon,
            system,
            &cfg.engine.propagator,
            cfg.output.record_every,
        )?;
        variants.push(Variant { label, field, evolution });
        Ok(())
    };
    if !cfg.post.smoothing_sigmas.is_empty() {
        let ta = t_act.ok_or_else(|| Error::Config("smoothing needs a run where control activates".into()))?;
        let window = (ta - 0.5 * period, ta + 0.5 * period);
        for &s in &cfg.post.smoothing_sigmas {
            replay(format!("smooth_sigma_{s}Tp"), gaussian_smooth(&field, s * period, window)?)?;
        }
    }
    for &[a, b] in &cfg.post.switch_off {
        replay(format!("switch_off_{a}_{b}"), switch_off(&field, t_final + a, t_final + b)?)?;
    }
    Ok(EvolveReport { evolution, field, t_act, t_final, variants })
}

pub fn cmd_evolve(cfg: &RunConfig) -> Result<Manifest> {
    let start = Instant::now();
    let system = prepare(cfg)?;
    let report = run_evolution(cfg, &system)?;
    let dir = &cfg.output.dir;
    let mut m = Manifest::new("evolve", cfg)?;
    m.caches = system.caches.clone();

    let traj = &report.evolution.trajectory;
    let path = dir.join("trajectory.csv");
    io::write_trajectory(&path, traj)?;
    m.outputs.push(path);
    let path = dir.join("field.csv");
    io::write_field(&path, &report.field)?;
    m.outputs.push(path);
    let summary = trajectory_summary(traj);
    info!("final <eta2>/L = {} (max {}), t_act = {:?}", summary.final_eta2_per_l, summary.max_eta2_per_l, report.t_act);

    let mut extra = serde_json::Map::new();
    if cfg.output.decompose {
        let spectrum = full_spectrum(&system, Some(&cfg.output.cache_dir))?;
        m.caches.extend(spectrum.cache.clone());
        let dec = decompose(&report.evolution.state, &spectrum, cfg.output.weight_threshold)?;
        let path = dir.join("weights.csv");
        io::write_weights(&path, &dec, &spectrum)?;
        m.outputs.push(path);
        extra.insert("states_above_threshold".into(), dec.count_above.into());
        extra.insert("dominant_level".into(), serde_json::to_value(dec.levels.first())?);
    }
    if cfg.output.stft {
        let sg = field_spectrogram(cfg, &report.field)?;
        let path = dir.join("spectrogram.csv");
        io::write_spectrogram(&path, &sg)?;
        m.outputs.push(path);
    }
    let mut variants = Vec::new();
    for v in &report.variants {
        let path = dir.join(format!("trajectory_{}.csv", v.label));
        io::write_trajectory(&path, &v.evolution.trajectory)?;
        m.outputs.push(path);
        variants.push(serde_json::json!({
            "label": v.label,
            "final_eta2_per_L": v.evolution.trajectory.final_eta2_per_l(),
        }));
    }
    m.summary = serde_json::json!({
        "trajectory": summary,
        "t_act": report.t_act,
        "t_final": report.t_final,
        "variants": variants,
        "analysis": extra,
    });
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

fn field_spectrogram(cfg: &RunConfig, field: &FieldSamples) -> Result<Spectrogram> {
    stft(field, &cfg.stft.params(cfg.pulse.period()))
}

/// Matrix CSV: one row per Φ₀, one column per ω_p.
fn write_matrix(path: &Path, grid: &ScanGrid, value: impl Fn(&crate::scan::CellResult) -> f64) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["phi0\\omega_p".to_string()];
    header.extend(grid.grid.omega.iter().map(|v| crate::scan::fmt(*v)));
    w.write_record(&header)?;
    let n_phi = grid.grid.phi0.len();
    for (j, p) in grid.grid.phi0.iter().enumerate() {
        let mut row = vec![crate::scan::fmt(*p)];
        for i in 0..grid.grid.omega.len() {
            row.push(match &grid.cells[i * n_phi + j] {
                Ok(c) => crate::scan::fmt(value(c)),
                Err(_) => "NaN".into(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<Manifest> {
    let start = Instant::now();
    let scan = cfg.scan.clone().ok_or_else(|| Error::Config("scan needs a [scan] block".into()))?;
    let system = prepare(cfg)?;
    let grid = scan.grid()?;
    info!("scanning {} cells with {} control variants", grid.len(), scan.controls.len());
    let progress = |done: usize, total: usize| {
        if done % 50 == 0 || done == total {
            info!("{done}/{total} cells");
        }
    };
    let result = run_grid_multi(&system, &cfg.pulse, cfg.drive, &scan.controls, &grid, &cfg.engine, Some(&progress))?;
    let dir = &cfg.output.dir;
    let mut m = Manifest::new("scan", cfg)?;
    m.caches = system.caches.clone();

    let path = dir.join("scan.csv");
    result.write_csv(&path, None)?;
    m.outputs.push(path);
    for (path, f) in [
        ("grid_max.csv", (|c: &crate::scan::CellResult| c.max_eta2_per_l) as fn(&_) -> f64),
        ("grid_final.csv", |c| c.final_eta2_per_l),
    ] {
        let path = dir.join(path);
        write_matrix(&path, &result, f)?;
        m.outputs.push(path);
    }
    let mut best = Vec::new();
    for (k, c) in scan.controls.iter().enumerate() {
        let tag = serde_json::to_value(c.mode)?.as_str().unwrap_or("control").to_string();
        let path = dir.join(format!("scan_{k}_{tag}.csv"));
        result.write_csv(&path, Some(k))?;
        m.outputs.push(path);
        let path = dir.join(format!("grid_controlled_{k}_{tag}.csv"));
        write_matrix(&path, &result, |cell| cell.controlled[k].final_eta2_per_l)?;
        m.outputs.push(path);
        best.push(result.best_controlled(k).map(|cell| {
            serde_json::json!({
                "control": c,
                "omega_p": cell.omega_p,
                "phi0": cell.phi0,
                "final_eta2_per_L": cell.controlled[k].final_eta2_per_l,
            })
        }));
    }
    m.failures = result.failures();
    if m.failures > 0 {
        warn!("{} cells failed; see the error column", m.failures);
    }
    m.summary = serde_json::json!({ "cells": grid.len(), "best_controlled": best });
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Manifest> {
    let start = Instant::now();
    let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config("sweep needs a [sweep] block".into()))?;
    let control = cfg.control.ok_or_else(|| Error::Config("sweep needs a [control] block".into()))?;
    let system = prepare(cfg)?;
    let t_act = sweep.t_act.expand()?;
    info!("sweeping {} activation times", t_act.len());
    let curve = activation_sweep(&system, &cfg.pulse, cfg.drive, &control, &t_act, &cfg.engine, sweep.direction)?;
    let mut m = Manifest::new("sweep", cfg)?;
    m.caches = system.caches.clone();
    let path = cfg.output.dir.join("sweep.csv");
    curve.write_csv(&path)?;
    m.outputs.push(path);
    let path = cfg.output.dir.join("sweep.json");
    curve.write_json(&path)?;
    m.outputs.push(path);
    info!(
        "uncontrolled {}, policy {} (t_act {:?}), optimum {} at t_act {}",
        curve.uncontrolled_final, curve.policy_final, curve.policy_t_act, curve.best.1, curve.best.0
    );
    m.summary = serde_json::json!({
        "uncontrolled_final": curve.uncontrolled_final,
        "policy_final": curve.policy_final,
        "policy_t_act": curve.policy_t_act,
        "best_t_act": curve.best.0,
        "best_final": curve.best.1,
    });
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

/// Unit sinusoid `sin(ω t + φ)` with `φ` drawn from `seed`.
pub fn synthetic_sinusoid(omega: f64, duration: f64, dt: f64, seed: u64) -> FieldSamples {
    let phase = rand_chacha::ChaCha8Rng::seed_from_u64(seed).gen_range(0.0..std::f64::consts::TAU);
    let n = (duration / dt).round() as usize;
    FieldSamples::from_fn((0..=n).map(|k| k as f64 * dt).collect(), |t| (omega * t + phase).sin())
}

pub fn cmd_stft(cfg: &RunConfig, args: &StftArgs, seed: u64) -> Result<Manifest> {
    let start = Instant::now();
    std::fs::create_dir_all(&cfg.output.dir)?;
    let period = cfg.pulse.period();
    let field = match (&args.input, args.synthetic_omega) {
        (Some(p), _) => FieldSamples::read_csv(p)?,
        (None, Some(w)) => synthetic_sinusoid(w, args.duration, 0.02 * period, seed),
        (None, None) => return Err(Error::Config("stft needs --input or --synthetic-omega".into())),
    };
    let sg = field_spectrogram(cfg, &field)?;
    let mut m = Manifest::new("stft", &serde_json::json!({ "run": cfg, "input": args.input, "seed": seed }))?;
    let path = cfg.output.dir.join("spectrogram.csv");
    io::write_spectrogram(&path, &sg)?;
    m.outputs.push(path);
    m.summary = serde_json::json!({ "windows": sg.times.len(), "ridge": sg.ridge() });
    m.wall_time_s = start.elapsed().as_secs_f64();
    Ok(m)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let manifest = match &cli.command {
        Command::Config => {
            print!("{}", cfg.to_toml()?);
            return Ok(());
        }
        Command::Spectrum => cmd_spectrum(&cfg)?,
        Command::Evolve => cmd_evolve(&cfg)?,
        Command::Scan => cmd_scan(&cfg)?,
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::Stft(args) => cmd_stft(&cfg, args, cli.seed.unwrap_or(0))?,
    };
    let path = manifest.write(&cfg.output.dir)?;
    println!("{}", serde_json::to_string_pretty(&manifest.summary)?);
    info!("wrote {}", path.display());
    if manifest.failures > 0 {
        return Err(Error::PartialScan(manifest.failures));
    }
    Ok(())
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(p) = &cli.preset {
        if !PRESETS.contains(&p.as_str()) {
            eprintln!("error: unknown preset {p:?}; available: {}", PRESETS.join(", "));
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
