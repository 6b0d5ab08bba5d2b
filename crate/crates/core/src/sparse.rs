//! Compressed-sparse-row complex matrices.

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Entries at or below this magnitude are never stored.
pub const DROP_TOLERANCE: f64 = 1e-15;

/// Tolerance of the hermiticity check performed by [`SparseOperator::mark_hermitian`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<Complex64>,
    /// Copy of `values` when every entry is real.
    real: Option<Vec<f64>>,
    hermitian: bool,
}

fn real_parts(values: &[Complex64]) -> Option<Vec<f64>> {
    values.iter().all(|v| v.im == 0.0).then(|| values.iter().map(|v| v.re).collect())
}

impl SparseOperator {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
    ) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); nrows];
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) outside {nrows}x{ncols}");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v.norm() > DROP_TOLERANCE {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let real = real_parts(&values);
        Self { nrows, ncols, row_ptr, col_idx, values, real, hermitian: false }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, std::iter::empty())
    }

    pub fn identity(dim: usize) -> Self {
        Self::diagonal(&vec![1.0; dim])
    }

    /// Real diagonal matrix; always hermitian.
    pub fn diagonal(diag: &[f64]) -> Self {
        let mut op = Self::from_triplets(
            diag.len(),
            diag.len(),
            diag.iter().enumerate().map(|(k, &d)| (k, k, Complex64::new(d, 0.0))),
        );
        op.hermitian = true;
        op
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    /// Sets the hermiticity flag after verifying `A = A†` elementwise.
    pub fn mark_hermitian(mut self) -> Result<Self> {
        if !self.is_square() || self.hermiticity_defect() > HERMITIAN_TOLERANCE {
            return Err(Error::NotHermitian);
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Iterates stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    /// Stored entries of one row as `(col, value)`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match cols.binary_search(&c) {
            Ok(k) => self.values[self.row_ptr[r] + k],
            Err(_) => ZERO,
        }
    }

    /// True when every stored entry is real.
    pub fn is_real(&self) -> bool {
        self.real.is_some()
    }

    /// `sum_k A_{r,k} x_k` for one row.
    #[inline]
    pub fn row_dot(&self, r: usize, x: &[Complex64]) -> Complex64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        let cols = &self.col_idx[range.clone()];
        match &self.real {
            Some(rv) => {
                let (mut re, mut im) = (0.0, 0.0);
                for (&c, &v) in cols.iter().zip(&rv[range]) {
                    re += v * x[c].re;
                    im += v * x[c].im;
                }
                Complex64::new(re, im)
            }
            None => cols.iter().zip(&self.values[range]).map(|(&c, v)| v * x[c]).sum(),
        }
    }

    /// `y = A x`
    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row_dot(r, x);
        }
    }

    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.nrows];
        self.apply(x, &mut y);
        y
    }

    /// `<x| A |x>` without allocating.
    pub fn quadratic_form(&self, x: &[Complex64]) -> Complex64 {
        assert!(self.is_square());
        assert_eq!(x.len(), self.ncols);
        let mut total = ZERO;
        for r in 0..self.nrows {
            total += x[r].conj() * self.row_dot(r, x);
        }
        total
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut op = Self::from_triplets(
            self.ncols,
            self.nrows,
            self.triplets().map(|(r, c, v)| (c, r, v.conj())),
        );
        op.hermitian = self.hermitian;
        op
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        let mut op = self.clone();
        op.values.iter_mut().for_each(|v| *v *= alpha);
        op.real = real_parts(&op.values);
        op.hermitian = self.hermitian && alpha.im == 0.0;
        op
    }

    /// `alpha A + beta B`; the result is not flagged hermitian.
    pub fn linear_combination(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        Self::from_triplets(
            self.nrows,
            self.ncols,
            self.triplets()
                .map(|(r, c, v)| (r, c, alpha * v))
                .chain(other.triplets().map(|(r, c, v)| (r, c, beta * v))),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        let one = Complex64::new(1.0, 0.0);
        self.linear_combination(one, other, one)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Sparse product `A B`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows, "inner dimensions differ");
        let mut acc = vec![ZERO; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols = Vec::new();
        let mut triplets = Vec::new();
        for r in 0..self.nrows {
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if !touched[c] {
                        touched[c] = true;
                        cols.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            for &c in &cols {
                triplets.push((r, c, acc[c]));
                acc[c] = ZERO;
                touched[c] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, triplets)
    }

    /// `[A, B] = AB - BA`
    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// `{A, B} = AB + BA`
    pub fn anticommutator(&self, other: &Self) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    /// Largest entry magnitude; the norm used by the algebra checks.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `max |A_ij - conj(A_ji)|`
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.nrows.min(self.ncols)).map(|k| self.get(k, k)).sum()
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        let mut m = Mat::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }
}
