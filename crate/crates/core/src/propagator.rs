//! Short-time propagators `exp(-i H(Φ) dt)` with Φ frozen over the step.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::tridiagonal_eigen;
use crate::linalg::{axpy, dot, norm, scale};
use crate::operators::HamiltonianFamily;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scheme {
    /// Lanczos projection onto at most `max_subspace` Krylov vectors.
    KrylovExpm { max_subspace: usize },
    /// Chebyshev expansion over Gershgorin spectral bounds.
    ChebyExpm { max_order: usize },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::KrylovExpm { max_subspace: 30 }
    }
}

/// Workspace for repeated steps on one Hilbert space.
#[derive(Debug)]
pub struct Propagator {
    scheme: Scheme,
    tolerance: f64,
    basis: Vec<Vec<Complex64>>,
    work: Vec<Complex64>,
    bounds: Option<(f64, f64)>,
}

impl Propagator {
    pub fn new(dim: usize, scheme: Scheme, tolerance: f64) -> Self {
        let slots = match scheme {
            Scheme::KrylovExpm { max_subspace } => max_subspace + 1,
            Scheme::ChebyExpm { .. } => 3,
        };
        Self {
            scheme,
            tolerance,
            basis: vec![vec![ZERO; dim]; slots],
            work: vec![ZERO; dim],
            bounds: None,
        }
    }

    /// Replaces `psi` by `exp(-i H(phi) dt) psi`. Returns the number of
    /// Hamiltonian applications used.
    pub fn step(&mut self, psi: &mut [Complex64], phi: f64, dt: f64, family: &HamiltonianFamily) -> Result<usize> {
        if dt == 0.0 {
            return Ok(0);
        }
        match self.scheme {
            Scheme::KrylovExpm { max_subspace } => self.krylov(psi, phi, dt, family, max_subspace),
            Scheme::ChebyExpm { max_order } => self.chebyshev(psi, phi, dt, family, max_order),
        }
    }

    fn krylov(
        &mut self,
        psi: &mut [Complex64],
        phi: f64,
        dt: f64,
        family: &HamiltonianFamily,
        max_subspace: usize,
    ) -> Result<usize> {
        let beta0 = norm(psi);
        if beta0 == 0.0 {
            return Ok(0);
        }
        self.basis[0].copy_from_slice(psi);
        scale(&mut self.basis[0], Complex64::new(1.0 / beta0, 0.0));
        let mut alpha: Vec<f64> = Vec::with_capacity(max_subspace);
        let mut beta: Vec<f64> = Vec::with_capacity(max_subspace);
        let mut coeffs = Vec::new();
        let mut estimate = f64::INFINITY;

        for j in 0..max_subspace {
            family.apply(phi, &self.basis[j], &mut self.work);
            let a = dot(&self.basis[j], &self.work).re;
            alpha.push(a);
            // Three-term recurrence; short subspaces stay orthogonal to round-off.
            axpy(Complex64::new(-a, 0.0), &self.basis[j], &mut self.work);
            if j > 0 {
                axpy(Complex64::new(-beta[j - 1], 0.0), &self.basis[j - 1], &mut self.work);
            }
            let b = norm(&self.work);
            let m = j + 1;
            if m < 3 && m < max_subspace && b > 1e-14 {
                beta.push(b);
                self.basis[m].copy_from_slice(&self.work);
                scale(&mut self.basis[m], Complex64::new(1.0 / b, 0.0));
                continue;
            }
            // exp(-i T dt) e_1 in the current Krylov space.
            let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
            coeffs = (0..m)
                .map(|r| {
                    (0..m)
                        .map(|k| vecs[(r, k)] * vecs[(0, k)] * Complex64::from_polar(1.0, -vals[k] * dt))
                        .sum::<Complex64>()
                })
                .collect::<Vec<Complex64>>();
            estimate = b * coeffs[m - 1].norm();
            if estimate <= self.tolerance || b < 1e-14 {
                break;
            }
            if m == max_subspace {
                return Err(Error::PropagatorTolerance {
                    tolerance: self.tolerance,
                    subspace: max_subspace,
                    estimate,
                });
            }
            beta.push(b);
            self.basis[m].copy_from_slice(&self.work);
            scale(&mut self.basis[m], Complex64::new(1.0 / b, 0.0));
        }
        debug_assert!(estimate.is_finite());
        psi.iter_mut().for_each(|x| *x = ZERO);
        for (k, c) in coeffs.iter().enumerate() {
            axpy(c * beta0, &self.basis[k], psi);
        }
        Ok(coeffs.len())
    }

    fn chebyshev(
        &mut self,
        psi: &mut [Complex64],
        phi: f64,
        dt: f64,
        family: &HamiltonianFamily,
        max_order: usize,
    ) -> Result<usize> {
        let (lo, hi) = *self.bounds.get_or_insert_with(|| family.spectral_bounds());
        let half_width = 0.5 * (hi - lo) * (1.0 + 1e-3);
        let centre = 0.5 * (hi + lo);
        let x = half_width * dt.abs();
        let order = chebyshev_order(x, self.tolerance);
        if order > max_order {
            return Err(Error::PropagatorTolerance {
                tolerance: self.tolerance,
                subspace: max_order,
                estimate: bessel_j(order.min(max_order), x).iter().last().copied().unwrap_or(1.0),
            });
        }
        let j = bessel_j(order, x);
        let sgn = dt.signum();
        // Scaled operator Hs = (H - centre) / half_width.
        let [t_prev, t_curr, t_next] = &mut self.basis[..3] else { unreachable!() };
        let work = &mut self.work;
        let apply_scaled = |x: &[Complex64], y: &mut [Complex64]| {
            family.apply(phi, x, y);
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi = (*yi - xi * centre) / half_width;
            }
        };
        t_prev.copy_from_slice(psi);
        apply_scaled(t_prev, t_curr);
        // (-i)^k factors, with the sign of dt folded in.
        let mi = Complex64::new(0.0, -sgn);
        let mut acc: Vec<Complex64> = t_prev.iter().map(|v| v * j[0]).collect();
        axpy(mi * 2.0 * j[1], t_curr, &mut acc);
        let mut phase = mi;
        for jk in j.iter().skip(2) {
            apply_scaled(t_curr, work);
            for ((n, w), p) in t_next.iter_mut().zip(work.iter()).zip(t_prev.iter()) {
                *n = 2.0 * w - p;
            }
            phase *= mi;
            axpy(phase * 2.0 * jk, t_next, &mut acc);
            std::mem::swap(t_prev, t_curr);
            std::mem::swap(t_curr, t_next);
        }
        let global = Complex64::from_polar(1.0, -centre * dt);
        for (p, a) in psi.iter_mut().zip(acc) {
            *p = a * global;
        }
        Ok(order)
    }
}

/// Expansion order after which `|J_k(x)|` stays below `tol / 100`.
fn chebyshev_order(x: f64, tol: f64) -> usize {
    let mut k = x.ceil() as usize + 2;
    loop {
        let j = bessel_j(k + 1, x);
        if j[k].abs() < tol * 1e-2 && j[k + 1].abs() < tol * 1e-2 {
            return k;
        }
        k += 2;
    }
}

/// `J_0(x) .. J_n(x)` by Miller's backward recurrence, normalized through
/// `J_0 + 2 sum J_{2k} = 1`.
pub fn bessel_j(n: usize, x: f64) -> Vec<f64> {
    if x == 0.0 {
        let mut out = vec![0.0; n + 1];
        out[0] = 1.0;
        return out;
    }
    let start = (n.max(x.ceil() as usize) + 30 + (x.abs().sqrt() * 10.0) as usize) | 1;
    let mut vals = vec![0.0; start + 2];
    vals[start + 1] = 0.0;
    vals[start] = 1e-300;
    for k in (1..=start).rev() {
        vals[k - 1] = 2.0 * k as f64 / x * vals[k] - vals[k + 1];
        if vals[k - 1].abs() > 1e250 {
            for v in vals[k - 1..].iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    let norm = vals[0] + 2.0 * vals.iter().skip(2).step_by(2).sum::<f64>();
    vals.truncate(n + 1);
    vals.iter_mut().for_each(|v| *v /= norm);
    vals
}
