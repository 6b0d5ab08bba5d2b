//! Dense brute-force integrator shared by the oracle tests.
#![allow(dead_code)]

use etapair::sparse::SparseOperator;
use etapair::system::System;
use etapair::pulses::PulseSpec;
use num_complex::Complex64;

pub type C = Complex64;

pub fn dense(op: &SparseOperator) -> Vec<Vec<C>> {
    (0..op.nrows()).map(|r| (0..op.ncols()).map(|c| op.get(r, c)).collect()).collect()
}

pub fn matmul(a: &[Vec<C>], b: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = a.len();
    let mut r = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                r[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    r
}

pub fn matvec(a: &[Vec<C>], x: &[C]) -> Vec<C> {
    a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

/// `exp(-i H dt)` by Taylor series on `A / 2^s` followed by `s` squarings.
pub fn expm(h: &[Vec<C>], dt: f64) -> Vec<Vec<C>> {
    let n = h.len();
    let norm: f64 = h.iter().map(|row| row.iter().map(|x| x.norm()).sum::<f64>()).fold(0.0, f64::max) * dt;
    let s = (norm / 0.1).log2().ceil().max(0.0) as i32;
    let scale = dt / 2f64.powi(s);
    let a: Vec<Vec<C>> = h.iter().map(|row| row.iter().map(|x| C::new(0.0, -scale) * x).collect()).collect();
    let mut result: Vec<Vec<C>> = (0..n).map(|i| (0..n).map(|j| C::new((i == j) as u8 as f64, 0.0)).collect()).collect();
    let mut term = result.clone();
    for k in 1..30 {
        term = matmul(&term, &a);
        term.iter_mut().flatten().for_each(|x| *x /= k as f64);
        for i in 0..n {
            for j in 0..n {
                result[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..s {
        result = matmul(&result, &result);
    }
    result
}

pub fn expect(op: &[Vec<C>], x: &[C]) -> f64 {
    x.iter().zip(matvec(op, x)).map(|(a, b)| (a.conj() * b).re).sum()
}

/// Largest `|λ|` by power iteration on the square.
pub fn spectral_radius(op: &[Vec<C>]) -> f64 {
    let sq = matmul(op, op);
    let n = op.len();
    let mut v: Vec<C> = (0..n).map(|i| C::new(1.0 + 0.01 * i as f64, 0.3)).collect();
    let mut lam = 0.0;
    for _ in 0..5000 {
        let w = matvec(&sq, &v);
        let nrm = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        lam = nrm / v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / nrm).collect();
    }
    lam.sqrt()
}

pub fn pump(spec: &PulseSpec, t: f64) -> f64 {
    let tau = t - spec.t_l;
    let period = 2.0 * std::f64::consts::PI / spec.omega_p;
    if tau < 0.0 || tau > spec.n_p as f64 * period {
        return 0.0;
    }
    spec.phi0 * (spec.omega_p * tau).sin() * (spec.omega_p * tau / (2.0 * spec.n_p as f64)).sin().powi(2)
}

/// Brute-force run with optional Lyapunov handover at `t_act`.
pub fn brute_force(system: &System, psi0: &[C], spec: &PulseSpec, t_end: f64, handover: Option<f64>) -> Vec<C> {
    let period = 2.0 * std::f64::consts::PI / spec.omega_p;
    let dt = 0.02 * period;
    let mut n = (t_end / dt).round() as usize;
    if (n as f64) * dt < t_end * (1.0 - 1e-12) {
        n += 1;
    }
    let q = dense(&system.q);
    let q_max = spectral_radius(&q);
    assert!((q_max - system.q_max).abs() < 1e-8 * q_max);
    let mut psi = psi0.to_vec();
    for k in 0..n {
        let t = k as f64 * dt;
        let h_step = if k + 1 == n { t_end - t } else { dt };
        let phi = match handover {
            Some(ta) if t >= ta => (expect(&q, &psi) / q_max).clamp(-1.0, 1.0).asin(),
            _ => pump(spec, t),
        };
        let u = expm(&dense(&system.family.hamiltonian(phi)), h_step);
        psi = matvec(&u, &psi);
    }
    psi
}

pub fn fidelity(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm_sqr()
}
