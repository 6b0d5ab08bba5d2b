//! Restarted Lanczos iteration for extremal eigenpairs of Hermitian
//! operators, with full reorthogonalization.

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, scale};

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Krylov vectors per restart cycle.
    pub subspace: usize,
    pub max_restarts: usize,
    /// Target residual `||A v - theta v||`.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { subspace: 80, max_restarts: 50, tolerance: 1e-10, seed: 0x5eed }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<Complex64>,
    pub residual: f64,
}

#[derive(Clone, Copy)]
pub enum Which {
    Lowest,
    Highest,
}

/// Eigen-decomposition of a real symmetric tridiagonal matrix.
pub(crate) fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, Mat<f64>) {
    let m = alpha.len();
    let t = Mat::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let eig = t
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("tridiagonal eigensolver");
    let vals = (0..m).map(|k| eig.S().column_vector()[k]).collect();
    (vals, eig.U().to_owned())
}

pub fn random_start(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    let n = norm(&v);
    scale(&mut v, Complex64::new(1.0 / n, 0.0));
    v
}

/// Extremal eigenpair of the Hermitian operator given by `apply` (`y = A x`).
pub fn extremal_eigenpair<F>(apply: F, dim: usize, which: Which, opts: LanczosOptions) -> Result<Eigenpair>
where
    F: Fn(&[Complex64], &mut [Complex64]),
{
    let zero = Complex64::new(0.0, 0.0);
    let mut start = random_start(dim, opts.seed);
    let m_max = opts.subspace.min(dim).max(1);
    let mut w = vec![zero; dim];
    let mut residual = f64::INFINITY;

    for _ in 0..=opts.max_restarts {
        let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(m_max);
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta: Vec<f64> = Vec::with_capacity(m_max);
        basis.push(start.clone());
        loop {
            let j = basis.len() - 1;
            apply(&basis[j], &mut w);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Two passes of classical Gram-Schmidt against the whole basis.
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(v, &w);
                    axpy(-c, v, &mut w);
                }
            }
            let b = norm(&w);
            if basis.len() == m_max || b < 1e-14 {
                break;
            }
            beta.push(b);
            let mut next = w.clone();
            scale(&mut next, Complex64::new(1.0 / b, 0.0));
            basis.push(next);
        }
        let (vals, vecs) = tridiagonal_eigen(&alpha, &beta);
        let k = match which {
            Which::Lowest => 0,
            Which::Highest => vals.len() - 1,
        };
        let theta = vals[k];
        let mut ritz = vec![zero; dim];
        for (j, v) in basis.iter().enumerate() {
            axpy(Complex64::new(vecs[(j, k)], 0.0), v, &mut ritz);
        }
        let n = norm(&ritz);
        scale(&mut ritz, Complex64::new(1.0 / n, 0.0));
        apply(&ritz, &mut w);
        axpy(Complex64::new(-theta, 0.0), &ritz, &mut w);
        residual = norm(&w);
        if residual <= opts.tolerance {
            return Ok(Eigenpair { value: theta, vector: ritz, residual });
        }
        start = ritz;
    }
    Err(Error::NoConvergence {
        what: "Lanczos extremal eigenpair",
        iterations: opts.max_restarts * m_max,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseOperator;

    #[test]
    fn diagonal_extremes() {
        // A shuffled uniform grid with spacing 0.1.
        let diag: Vec<f64> = (0..300).map(|k| ((k * 7919) % 300) as f64 * 0.1 - 15.0).collect();
        let op = SparseOperator::diagonal(&diag);
        let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let opts = LanczosOptions { subspace: 60, ..Default::default() };
        let low = extremal_eigenpair(|x, y| op.apply(x, y), 300, Which::Lowest, opts).unwrap();
        let high = extremal_eigenpair(|x, y| op.apply(x, y), 300, Which::Highest, opts).unwrap();
        assert!((low.value - lo).abs() < 1e-9);
        assert!((high.value - hi).abs() < 1e-9);
    }

    #[test]
    fn tridiagonal_matches_known_spectrum() {
        // Path graph Laplacian-like matrix: eigenvalues 2 cos(k pi/(n+1)).
        let n = 6;
        let (vals, _) = tridiagonal_eigen(&vec![0.0; n], &vec![1.0; n - 1]);
        for (k, v) in vals.iter().enumerate() {
            let exact = -2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-12);
        }
    }
}
