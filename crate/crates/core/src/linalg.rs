//! Dense complex vector kernels.

use num_complex::Complex64;

/// `<x|y>`, conjugate-linear in `x`.
#[inline]
pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha x`
#[inline]
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(x: &mut [Complex64], alpha: Complex64) {
    x.iter_mut().for_each(|v| *v *= alpha);
}

/// `|<x|y>|^2` for normalized vectors.
pub fn fidelity(x: &[Complex64], y: &[Complex64]) -> f64 {
    dot(x, y).norm_sqr()
}
