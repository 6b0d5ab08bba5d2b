//! Field-free spectrum labelled by `<η²>`, eigenstate weights of evolved
//! states, and short-time Fourier analysis of realized fields.

use std::path::Path;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::error::{Error, Result};
use crate::evolution::{ManyBodyState, Trajectory};
use crate::pulses::FieldSamples;
use crate::system::{CacheRecord, System};

/// Relative gap below which eigenvalues of `H(0)` count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Complete eigenbasis of `H(0)` in which `η²` is diagonal as well.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Ascending.
    pub energies: Vec<f64>,
    /// `<ψ_m| η² |ψ_m>`
    pub eta2: Vec<f64>,
    /// Eigenvectors as columns, real in the determinant basis.
    pub vectors: Mat<f64>,
    pub sites: usize,
    pub cache: Option<CacheRecord>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Largest `|ε_m|`.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, e| a.max(e.abs()))
    }

    pub fn eigenstate(&self, m: usize) -> ManyBodyState {
        let v = (0..self.dim()).map(|i| Complex64::new(self.vectors[(i, m)], 0.0)).collect();
        ManyBodyState::normalized(v, 0.0).expect("eigenvectors are normalized")
    }

    /// Consecutive index ranges of numerically equal energies.
    pub fn degenerate_blocks(&self) -> Vec<std::ops::Range<usize>> {
        blocks(&self.energies, DEGENERACY_TOLERANCE * self.energy_scale().max(1.0))
    }
}

fn blocks(energies: &[f64], tol: f64) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = 0;
    for k in 1..=energies.len() {
        if k == energies.len() || energies[k] - energies[k - 1] > tol {
            out.push(start..k);
            start = k;
        }
    }
    out
}

fn apply_real(op: &crate::sparse::SparseOperator, x: &[f64]) -> Vec<f64> {
    let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    op.mul_vec(&xc).into_iter().map(|v| v.re).collect()
}

fn compute_spectrum(system: &System) -> Result<(Vec<f64>, Vec<f64>, Mat<f64>)> {
    let dim = system.dim();
    let h = system.family.hamiltonian(0.0);
    let mut dense = Mat::<f64>::zeros(dim, dim);
    for (r, c, v) in h.triplets() {
        if v.im.abs() > 1e-14 {
            return Err(Error::Eigensolver("H(0) is not real".into()));
        }
        dense[(r, c)] = v.re;
    }
    log::info!("dense eigensolve of dimension {dim}");
    let eig = dense
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    drop(dense);
    let energies: Vec<f64> = (0..dim).map(|k| eig.S().column_vector()[k]).collect();
    let mut vectors = eig.U().to_owned();
    drop(eig);
    let eta_sq = &system.eta.eta_sq;
    if eta_sq.triplets().any(|(_, _, v)| v.im.abs() > 1e-14) {
        return Err(Error::Eigensolver("eta^2 is not real".into()));
    }
    let scale = energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    let mut eta2 = vec![0.0; dim];
    for block in blocks(&energies, DEGENERACY_TOLERANCE * scale) {
        let k = block.len();
        let cols: Vec<Vec<f64>> = block.clone().map(|m| vectors.col(m).iter().copied().collect()).collect();
        let images: Vec<Vec<f64>> = cols.iter().map(|c| apply_real(eta_sq, c)).collect();
        if k == 1 {
            eta2[block.start] = cols[0].iter().zip(&images[0]).map(|(a, b)| a * b).sum();
            continue;
        }
        // η² restricted to the block, then rotated to its eigenbasis.
        let small = Mat::<f64>::from_fn(k, k, |i, j| {
            let a: f64 = cols[i].iter().zip(&images[j]).map(|(x, y)| x * y).sum();
            let b: f64 = cols[j].iter().zip(&images[i]).map(|(x, y)| x * y).sum();
            0.5 * (a + b)
        });
        let sub = small
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        for j in 0..k {
            eta2[block.start + j] = sub.S().column_vector()[j];
            for i in 0..dim {
                vectors[(i, block.start + j)] = (0..k).map(|l| cols[l][i] * sub.U()[(l, j)]).sum();
            }
        }
    }
    Ok((energies, eta2, vectors))
}

/// Dense diagonalization of `H(0)` with `η²` diagonalized inside each
/// degenerate block; cached under `cache_dir` when given.
pub fn full_spectrum(system: &System, cache_dir: Option<&Path>) -> Result<Spectrum> {
    let dim = system.dim();
    let sites = system.sites();
    let Some(dir) = cache_dir else {
        let (energies, eta2, vectors) = compute_spectrum(system)?;
        return Ok(Spectrum { energies, eta2, vectors, sites, cache: None });
    };
    let key = system.params.cache_key("spectrum");
    let entry = cache::load_or_build(dir, &key, || {
        let (e, h, v) = compute_spectrum(system)?;
        let mut payload = Vec::with_capacity(2 * dim + dim * dim);
        payload.extend_from_slice(&e);
        payload.extend_from_slice(&h);
        for m in 0..dim {
            payload.extend(v.col(m).iter().copied());
        }
        Ok(payload)
    })?;
    let p = &entry.payload;
    if p.len() != 2 * dim + dim * dim {
        return Err(Error::Cache {
            path: entry.path.clone(),
            reason: "spectrum payload has the wrong size; delete the file to rebuild it".into(),
        });
    }
    let vectors = Mat::from_fn(dim, dim, |i, m| p[2 * dim + m * dim + i]);
    Ok(Spectrum {
        energies: p[..dim].to_vec(),
        eta2: p[dim..2 * dim].to_vec(),
        vectors,
        sites,
        cache: Some(CacheRecord { path: entry.path.clone(), sha256: entry.header.payload_sha256.clone() }),
    })
}

/// Weight carried by one `(ε, <η²>)` level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelWeight {
    pub energy: f64,
    pub eta2_per_l: f64,
    pub weight: f64,
    pub states: usize,
}

/// `w_m = |<ψ_m|Ψ>|²` with summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub weights: Vec<f64>,
    pub threshold: f64,
    /// Number of `w_m >= threshold`.
    pub count_above: usize,
    pub total: f64,
    /// `Σ w_m <η²>_m`
    pub mean_eta2: f64,
    /// Levels with any weight at or above `threshold`, by decreasing weight.
    pub levels: Vec<LevelWeight>,
}

impl Decomposition {
    /// Total weight on states with `|ε - energy| <= energy_tol` and
    /// `|<η²>/L - eta2_per_l| <= 1e-6`.
    pub fn weight_near(&self, spectrum: &Spectrum, energy: f64, energy_tol: f64, eta2_per_l: f64) -> f64 {
        let l = spectrum.sites as f64;
        self.weights
            .iter()
            .zip(spectrum.energies.iter().zip(&spectrum.eta2))
            .filter(|(_, (e, h))| (*e - energy).abs() <= energy_tol && (*h / l - eta2_per_l).abs() <= 1e-6)
            .map(|(w, _)| w)
            .sum()
    }
}

pub fn decompose(state: &ManyBodyState, spectrum: &Spectrum, threshold: f64) -> Result<Decomposition> {
    let dim = spectrum.dim();
    if state.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, actual: state.dim() });
    }
    let amps = state.amplitudes();
    let parts = Mat::<f64>::from_fn(dim, 2, |i, j| if j == 0 { amps[i].re } else { amps[i].im });
    let proj = spectrum.vectors.transpose() * &parts;
    let weights: Vec<f64> = (0..dim).map(|m| proj[(m, 0)].powi(2) + proj[(m, 1)].powi(2)).collect();
    let total = weights.iter().sum();
    let mean_eta2 = weights.iter().zip(&spectrum.eta2).map(|(w, h)| w * h).sum();
    let count_above = weights.iter().filter(|&&w| w >= threshold).count();

    let l = spectrum.sites as f64;
    let mut levels: Vec<LevelWeight> = Vec::new();
    for block in spectrum.degenerate_blocks() {
        let mut groups: Vec<LevelWeight> = Vec::new();
        for m in block {
            let h = spectrum.eta2[m] / l;
            match groups.iter_mut().find(|g| (g.eta2_per_l - h).abs() <= 1e-6) {
                Some(g) => {
                    g.weight += weights[m];
                    g.states += 1;
                }
                None => groups.push(LevelWeight {
                    energy: spectrum.energies[m],
                    eta2_per_l: h,
                    weight: weights[m],
                    states: 1,
                }),
            }
        }
        levels.extend(groups.into_iter().filter(|g| g.weight >= threshold));
    }
    levels.sort_by(|a, b| b.weight.total_cmp(&a.weight));
    Ok(Decomposition { weights, threshold, count_above, total, mean_eta2, levels })
}

/// Window and grid of a short-time Fourier transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftParams {
    /// Standard deviation of the Gaussian window.
    pub sigma: f64,
    /// Nominal window width; sets the centre grid and the border mask.
    /// The Gaussian itself is evaluated out to `4σ`.
    pub width: f64,
    pub hop: f64,
    pub freq_min: f64,
    pub freq_max: f64,
    pub freq_step: f64,
    /// Interval outside which windows are flagged as border effects;
    /// defaults to the extent of the nonzero field.
    #[serde(default)]
    pub support: Option<(f64, f64)>,
}

impl StftParams {
    /// `σ = T_p`, width `4 T_p`, hop `T_p / 2`, ω in `[10, 30]`.
    pub fn for_period(period: f64) -> Self {
        Self {
            sigma: period,
            width: 4.0 * period,
            hop: 0.5 * period,
            freq_min: 10.0,
            freq_max: 30.0,
            freq_step: 0.02,
            support: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    /// Window centres.
    pub times: Vec<f64>,
    /// Angular frequencies.
    pub freqs: Vec<f64>,
    /// `magnitude[i][j] = |S(freqs[j], times[i])|`
    pub magnitude: Vec<Vec<f64>>,
    /// True where the window leaves the support.
    pub border: Vec<bool>,
    pub params: StftParams,
}

impl Spectrogram {
    /// Frequency of maximal magnitude per window; `None` for an all-zero column.
    pub fn ridge(&self) -> Vec<Option<f64>> {
        self.magnitude
            .iter()
            .map(|row| {
                let (j, m) = row
                    .iter()
                    .enumerate()
                    .fold((0, 0.0), |acc, (j, &v)| if v > acc.1 { (j, v) } else { acc });
                (m > 0.0).then(|| self.freqs[j])
            })
            .collect()
    }
}

/// `|S(ω, t)| = |Σ_k Φ_k g(t_k - t) e^{-iω t_k} Δt|` on a uniform grid.
pub fn stft(samples: &FieldSamples, params: &StftParams) -> Result<Spectrogram> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    // An evolution whose horizon is not a multiple of dt ends with a
    // shortened step; its last sample is dropped.
    let trimmed;
    let samples = match samples.t.as_slice() {
        [a, b, .., y, z] if z - y < (b - a) * (1.0 - 1e-6) => {
            let k = samples.len() - 1;
            trimmed = FieldSamples { t: samples.t[..k].to_vec(), phi: samples.phi[..k].to_vec() };
            &trimmed
        }
        _ => samples,
    };
    let n = samples.len();
    let dt = samples.spacing();
    if samples.t.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-6 * dt) {
        return Err(Error::InvalidArgument("stft needs a uniform sample grid".into()));
    }
    if !(params.sigma > 0.0 && params.hop > 0.0 && params.freq_step > 0.0 && params.freq_max >= params.freq_min) {
        return Err(Error::InvalidArgument("stft parameters must be positive".into()));
    }
    let (t0, t1) = (samples.t[0], samples.t[n - 1]);
    if params.width > t1 - t0 {
        return Err(Error::InvalidArgument(format!(
            "window width {} longer than the signal ({})",
            params.width,
            t1 - t0
        )));
    }
    let support = params.support.unwrap_or_else(|| {
        let nz: Vec<f64> = samples.t.iter().zip(&samples.phi).filter(|(_, p)| **p != 0.0).map(|(t, _)| *t).collect();
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (t0, t1),
        }
    });
    let half = 0.5 * params.width;
    let reach = 4.0 * params.sigma;
    let n_freq = ((params.freq_max - params.freq_min) / params.freq_step + 1e-9).floor() as usize + 1;
    let freqs: Vec<f64> = (0..n_freq).map(|j| params.freq_min + j as f64 * params.freq_step).collect();
    let n_win = ((t1 - t0 - params.width) / params.hop + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(n_win);
    let mut magnitude = Vec::with_capacity(n_win);
    let mut border = Vec::with_capacity(n_win);
    for w in 0..n_win {
        let tc = t0 + half + w as f64 * params.hop;
        let lo = samples.t.partition_point(|&t| t < tc - reach);
        let hi = samples.t.partition_point(|&t| t <= tc + reach);
        let weighted: Vec<(f64, f64)> = (lo..hi)
            .map(|k| {
                let x = (samples.t[k] - tc) / params.sigma;
                (samples.t[k], samples.phi[k] * (-0.5 * x * x).exp() * dt)
            })
            .collect();
        let row = freqs
            .iter()
            .map(|&om| {
                let s: Complex64 = weighted.iter().map(|&(t, a)| Complex64::from_polar(a, -om * t)).sum();
                s.norm()
            })
            .collect();
        times.push(tc);
        magnitude.push(row);
        border.push(tc - half < support.0 - 1e-9 || tc + half > support.1 + 1e-9);
    }
    Ok(Spectrogram { times, freqs, magnitude, border, params: StftParams { support: Some(support), ..*params } })
}

/// Headline numbers of one trajectory, per site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub max_eta2_per_l: f64,
    pub final_eta2_per_l: f64,
    pub t_of_max: f64,
    pub t_act: Option<f64>,
}

pub fn trajectory_summary(traj: &Trajectory) -> TrajectorySummary {
    let best = traj
        .samples
        .iter()
        .fold(None::<&crate::evolution::Sample>, |acc, s| match acc {
            Some(a) if a.eta2_per_l >= s.eta2_per_l => Some(a),
            _ => Some(s),
        })
        .expect("trajectory is never empty");
    TrajectorySummary {
        max_eta2_per_l: best.eta2_per_l,
        final_eta2_per_l: traj.final_eta2_per_l(),
        t_of_max: best.t,
        t_act: traj.meta.t_act,
    }
}

/// Multiplet values `η(η+1)` for `η = 0..=L/2`.
pub fn multiplet_values(sites: usize) -> Vec<f64> {
    (0..=sites / 2).map(|e| (e * (e + 1)) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(t1: f64, dt: f64) -> Vec<f64> {
        (0..=((t1 / dt).round() as usize)).map(|k| k as f64 * dt).collect()
    }

    #[test]
    fn sinusoid_ridge_is_flat() {
        let p = StftParams::for_period(2.0 * PI / 19.1);
        let s = FieldSamples::from_fn(grid(20.0, 0.005), |t| 0.3 * (19.1 * t).sin());
        let spec = stft(&s, &p).unwrap();
        for (r, b) in spec.ridge().into_iter().zip(&spec.border) {
            if !b {
                assert!((r.unwrap() - 19.1).abs() <= p.freq_step * (1.0 + 1e-6), "{r:?}");
            }
        }
    }

    #[test]
    fn chirp_ridge_is_monotone() {
        let p = StftParams::for_period(0.3);
        let s = FieldSamples::from_fn(grid(30.0, 0.005), |t| (15.0 * t + 0.1 * t * t).sin());
        let ridge: Vec<f64> = stft(&s, &p).unwrap().ridge().into_iter().map(Option::unwrap).collect();
        assert!(ridge.windows(2).all(|w| w[1] >= w[0]));
        assert!(ridge[0] < 16.5 && *ridge.last().unwrap() > 20.0);
    }

    #[test]
    fn zero_field_gives_zero_magnitude() {
        let p = StftParams::for_period(0.3);
        let s = FieldSamples::from_fn(grid(5.0, 0.01), |_| 0.0);
        let spec = stft(&s, &p).unwrap();
        assert!(spec.magnitude.iter().flatten().all(|&m| m == 0.0));
        assert!(spec.ridge().iter().all(Option::is_none));
        let short = FieldSamples::from_fn(grid(0.5, 0.01), |_| 0.0);
        assert!(stft(&short, &p).is_err());
    }

    #[test]
    fn shortened_final_step_is_ignored() {
        let dt = 0.01;
        let mut t: Vec<f64> = (0..2000).map(|k| k as f64 * dt).collect();
        t.push(t[1999] + 0.3 * dt);
        let s = FieldSamples::from_fn(t, |x| (15.0 * x).sin());
        let p = StftParams::for_period(2.0 * PI / 15.0);
        let ridge = stft(&s, &p).unwrap().ridge();
        assert!(ridge.iter().all(|r| (r.unwrap() - 15.0).abs() < 0.05));
        let mut bad = s.clone();
        bad.t[1000] += 0.5 * dt;
        assert!(stft(&bad, &p).is_err());
    }

    #[test]
    fn block_grouping() {
        let b = blocks(&[0.0, 1e-10, 1.0, 2.0, 2.0], 1e-8);
        assert_eq!(b, vec![0..2, 2..3, 3..5]);
    }
}
