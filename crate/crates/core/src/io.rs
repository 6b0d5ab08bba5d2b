//! CSV and JSON writers for run outputs, plus the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{Decomposition, Spectrogram, Spectrum};
use crate::error::Result;
use crate::evolution::Trajectory;
use crate::pulses::FieldSamples;
use crate::scan::fmt;
use crate::system::CacheRecord;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    f.flush()?;
    Ok(())
}

/// Columns `t, phi, eta2, eta2_per_L, q, norm, control_active`; the
/// metadata goes to `<path>.json`.
pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let l = traj.meta.sites as f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "phi", "eta2", "eta2_per_L", "q", "norm", "control_active"])?;
    for s in &traj.samples {
        w.write_record([
            fmt(s.t),
            fmt(s.phi),
            fmt(s.eta2_per_l * l),
            fmt(s.eta2_per_l),
            fmt(s.q_expect),
            fmt(s.norm),
            (s.control_active as u8).to_string(),
        ])?;
    }
    w.flush()?;
    write_json(&sidecar(path), &traj.meta)
}

/// `path` with `.json` appended to the file name.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Columns `t, phi`, readable by [`FieldSamples::read_csv`].
pub fn write_field(path: &Path, samples: &FieldSamples) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "phi"])?;
    for (t, p) in samples.t.iter().zip(&samples.phi) {
        w.write_record([fmt(*t), fmt(*p)])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per eigenstate: `m, energy, eta2, eta2_per_L`.
pub fn write_spectrum(path: &Path, spectrum: &Spectrum) -> Result<()> {
    let l = spectrum.sites as f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["m", "energy", "eta2", "eta2_per_L"])?;
    for (m, (e, h)) in spectrum.energies.iter().zip(&spectrum.eta2).enumerate() {
        w.write_record([m.to_string(), fmt(*e), fmt(*h), fmt(h / l)])?;
    }
    w.flush()?;
    Ok(())
}

/// States with `w_m >= threshold`: `m, energy, eta2_per_L, weight`; the
/// level summary goes to `<path>.json`.
pub fn write_weights(path: &Path, dec: &Decomposition, spectrum: &Spectrum) -> Result<()> {
    let l = spectrum.sites as f64;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["m", "energy", "eta2_per_L", "weight"])?;
    for (m, &wm) in dec.weights.iter().enumerate() {
        if wm >= dec.threshold {
            w.write_record([m.to_string(), fmt(spectrum.energies[m]), fmt(spectrum.eta2[m] / l), fmt(wm)])?;
        }
    }
    w.flush()?;
    write_json(
        &sidecar(path),
        &serde_json::json!({
            "threshold": dec.threshold,
            "count_above": dec.count_above,
            "total": dec.total,
            "mean_eta2": dec.mean_eta2,
            "levels": dec.levels,
        }),
    )
}

/// Long format `t, omega, magnitude, border`; ridge in `<path>.json`.
pub fn write_spectrogram(path: &Path, sg: &Spectrogram) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "omega", "magnitude", "border"])?;
    for (i, row) in sg.magnitude.iter().enumerate() {
        for (j, m) in row.iter().enumerate() {
            w.write_record([fmt(sg.times[i]), fmt(sg.freqs[j]), fmt(*m), (sg.border[i] as u8).to_string()])?;
        }
    }
    w.flush()?;
    write_json(
        &sidecar(path),
        &serde_json::json!({ "params": sg.params, "times": sg.times, "ridge": sg.ridge(), "border": sg.border }),
    )
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub caches: Vec<CacheRecord>,
    pub outputs: Vec<PathBuf>,
    /// Cells or runs that failed; outputs are partial when nonzero.
    pub failures: usize,
    pub summary: serde_json::Value,
    pub wall_time_s: f64,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config)?,
            caches: Vec::new(),
            outputs: Vec::new(),
            failures: 0,
            summary: serde_json::Value::Null,
            wall_time_s: 0.0,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("{}.manifest.json", self.command));
        write_json(&path, self)?;
        Ok(path)
    }
}
