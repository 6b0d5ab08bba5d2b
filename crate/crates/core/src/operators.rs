//! Sparse many-body operators of the driven chain: the Peierls-phase
//! Hamiltonian family, the η-pairing algebra and the drift operator `Q`.

use num_complex::Complex64;

use crate::basis::{Bilinear, Mode, SectorBasis, Spin};
use crate::error::{Error, Result};
use crate::evolution::ManyBodyState;
use crate::lanczos::{extremal_eigenpair, LanczosOptions, Which};
use crate::sparse::SparseOperator;

/// Distinct nearest-neighbour bonds `(i, i+1 mod L)` of the ring.
pub fn ring_bonds(sites: usize) -> Vec<(usize, usize)> {
    match sites {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => (0..sites).map(|i| (i, (i + 1) % sites)).collect(),
    }
}

/// `(-1)^i`
fn stagger(i: usize) -> f64 {
    if i % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn require_even(basis: &SectorBasis) -> Result<()> {
    if basis.sites() % 2 != 0 {
        return Err(Error::OddRing(basis.sites()));
    }
    Ok(())
}

/// Matrix of `sum_k coef_k * op_k` from `from` into `to`.
pub fn assemble(from: &SectorBasis, to: &SectorBasis, terms: &[(f64, Bilinear)]) -> SparseOperator {
    let mut triplets = Vec::new();
    for (col, det) in from.dets().enumerate() {
        for &(coef, op) in terms {
            if let Some((img, sign)) = det.apply(op) {
                if let Some(row) = to.index(img) {
                    triplets.push((row, col, Complex64::new(coef * sign, 0.0)));
                }
            }
        }
    }
    SparseOperator::from_triplets(to.dim(), from.dim(), triplets)
}

/// The Hamiltonian `H(Φ) = -t_h (e^{iΦ} K + e^{-iΦ} K†) + U D`, stored as
/// its Φ-independent pieces so that a new phase costs no rebuild.
#[derive(Debug, Clone)]
pub struct HamiltonianFamily {
    hopping: f64,
    interaction: f64,
    forward: SparseOperator,
    backward: SparseOperator,
    doublons: Vec<f64>,
    fwd_rows: RealRows,
    bwd_rows: RealRows,
}

/// Compact real CSR used by the hot matrix-vector product.
#[derive(Debug, Clone)]
struct RealRows {
    ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl RealRows {
    fn from_sparse(op: &SparseOperator) -> Self {
        let mut ptr = vec![0u32];
        let mut cols = Vec::with_capacity(op.nnz());
        let mut vals = Vec::with_capacity(op.nnz());
        for r in 0..op.nrows() {
            for (c, v) in op.row(r) {
                debug_assert_eq!(v.im, 0.0);
                cols.push(c as u32);
                vals.push(v.re);
            }
            ptr.push(cols.len() as u32);
        }
        Self { ptr, cols, vals }
    }

    #[inline]
    fn row_dot(&self, r: usize, x: &[Complex64]) -> (f64, f64) {
        let (a, b) = (self.ptr[r] as usize, self.ptr[r + 1] as usize);
        let (mut re, mut im) = (0.0, 0.0);
        for (&c, &v) in self.cols[a..b].iter().zip(&self.vals[a..b]) {
            let xc = x[c as usize];
            re += v * xc.re;
            im += v * xc.im;
        }
        (re, im)
    }
}

impl HamiltonianFamily {
    pub fn build(basis: &SectorBasis, hopping: f64, interaction: f64) -> Self {
        let terms: Vec<(f64, Bilinear)> = ring_bonds(basis.sites())
            .into_iter()
            .flat_map(|(i, j)| {
                [Spin::Up, Spin::Down].map(|spin| (1.0, Bilinear::Hop { spin, to: i, from: j }))
            })
            .collect();
        let forward = assemble(basis, basis, &terms);
        let backward = forward.adjoint();
        let doublons = basis.dets().map(|d| d.doublons() as f64).collect();
        let fwd_rows = RealRows::from_sparse(&forward);
        let bwd_rows = RealRows::from_sparse(&backward);
        Self { hopping, interaction, forward, backward, doublons, fwd_rows, bwd_rows }
    }

    pub fn hopping(&self) -> f64 {
        self.hopping
    }

    pub fn interaction(&self) -> f64 {
        self.interaction
    }

    pub fn dim(&self) -> usize {
        self.doublons.len()
    }

    /// Forward hopping operator `K = sum c†_{i,σ} c_{i+1,σ}`.
    pub fn forward(&self) -> &SparseOperator {
        &self.forward
    }

    /// Diagonal of `D = sum_i n_{i,up} n_{i,down}`.
    pub fn doublon_counts(&self) -> &[f64] {
        &self.doublons
    }

    pub fn interaction_operator(&self) -> SparseOperator {
        SparseOperator::diagonal(&self.doublons)
    }

    /// Assembled `H(Φ)`.
    pub fn hamiltonian(&self, phi: f64) -> SparseOperator {
        let phase = Complex64::from_polar(self.hopping, phi);
        let hop = self.forward.linear_combination(-phase, &self.backward, -phase.conj());
        let u = self.interaction_operator().scale(Complex64::new(self.interaction, 0.0));
        hop.add(&u)
            .mark_hermitian()
            .expect("H(phi) is hermitian for real phi")
    }

    /// `y = H(Φ) x` without assembling `H(Φ)`.
    pub fn apply(&self, phi: f64, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let (c, s) = (self.hopping * phi.cos(), self.hopping * phi.sin());
        for (r, out) in y.iter_mut().enumerate() {
            let (ar, ai) = self.fwd_rows.row_dot(r, x);
            let (br, bi) = self.bwd_rows.row_dot(r, x);
            // -(e^{iΦ} a + e^{-iΦ} b) t_h
            let re = -(c * (ar + br) - s * (ai - bi));
            let im = -(c * (ai + bi) + s * (ar - br));
            let u = self.interaction * self.doublons[r];
            *out = Complex64::new(re + u * x[r].re, im + u * x[r].im);
        }
    }

    /// Gershgorin bounds on the spectrum of `H(Φ)`, valid for every real Φ.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim() {
            let radius: f64 = self.hopping
                * (self.forward.row(r).map(|(_, v)| v.norm()).sum::<f64>()
                    + self.backward.row(r).map(|(_, v)| v.norm()).sum::<f64>());
            let centre = self.interaction * self.doublons[r];
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }
}

/// `η⁺ = sum_i (-1)^i c†_{i,down} c†_{i,up}` from `lower` into `upper`.
fn eta_plus_between(lower: &SectorBasis, upper: &SectorBasis) -> SparseOperator {
    let terms: Vec<(f64, Bilinear)> = (0..lower.sites())
        .map(|i| (stagger(i), Bilinear::PairCreate(Mode::down(i), Mode::up(i))))
        .collect();
    assemble(lower, upper, &terms)
}

/// Value of `η_z = ½ sum_i (n_{i,up} + n_{i,down} - 1)` on a sector.
pub fn eta_z_value(basis: &SectorBasis) -> f64 {
    0.5 * (basis.n_up() as f64 + basis.n_down() as f64 - basis.sites() as f64)
}

/// η-pairing operators around one sector.
#[derive(Debug, Clone)]
pub struct EtaOperators {
    /// Sector → sector with one more pair (rectangular, possibly 0 rows).
    pub eta_plus: SparseOperator,
    /// Sector → sector with one fewer pair.
    pub eta_minus: SparseOperator,
    pub eta_z: SparseOperator,
    /// `½(η⁺η⁻ + η⁻η⁺) + η_z²` on the sector.
    pub eta_sq: SparseOperator,
}

impl EtaOperators {
    pub fn build(basis: &SectorBasis) -> Result<Self> {
        require_even(basis)?;
        let dim = basis.dim();
        let raise = match basis.shifted(1) {
            Some(upper) => eta_plus_between(basis, &upper),
            None => SparseOperator::zeros(0, dim),
        };
        let lower_raise = match basis.shifted(-1) {
            Some(lower) => eta_plus_between(&lower, basis),
            None => SparseOperator::zeros(dim, 0),
        };
        let eta_minus = lower_raise.adjoint();
        let ez = eta_z_value(basis);
        let eta_z = SparseOperator::diagonal(&vec![ez; dim]);
        let pm = lower_raise.matmul(&eta_minus);
        let mp = raise.adjoint().matmul(&raise);
        let eta_sq = pm
            .linear_combination(Complex64::new(0.5, 0.0), &mp, Complex64::new(0.5, 0.0))
            .add(&SparseOperator::diagonal(&vec![ez * ez; dim]))
            .mark_hermitian()?;
        Ok(Self { eta_plus: raise, eta_minus, eta_z, eta_sq })
    }
}

/// η-algebra on the direct sum of all sectors `(n_up, n_down)` with fixed
/// `n_up - n_down`, where `η⁺`, `η⁻` and `η_z` close into SU(2).
#[derive(Debug, Clone)]
pub struct EtaTower {
    pub sectors: Vec<SectorBasis>,
    pub offsets: Vec<usize>,
    pub eta_plus: SparseOperator,
    pub eta_minus: SparseOperator,
    pub eta_z: SparseOperator,
    pub eta_sq: SparseOperator,
}

impl EtaTower {
    /// `magnetization = n_up - n_down`.
    pub fn build(sites: usize, magnetization: isize) -> Result<Self> {
        if sites % 2 != 0 {
            return Err(Error::OddRing(sites));
        }
        let sectors: Vec<SectorBasis> = (0..=sites as isize)
            .filter_map(|n_up| {
                let n_down = n_up - magnetization;
                (n_down >= 0 && n_down <= sites as isize)
                    .then(|| SectorBasis::new(sites, n_up as usize, n_down as usize).ok())
                    .flatten()
            })
            .collect();
        let mut offsets = vec![0];
        for s in &sectors {
            offsets.push(offsets.last().unwrap() + s.dim());
        }
        let dim = *offsets.last().unwrap();
        let mut plus = Vec::new();
        let mut z = Vec::with_capacity(dim);
        for (k, s) in sectors.iter().enumerate() {
            z.extend(std::iter::repeat(eta_z_value(s)).take(s.dim()));
            if k + 1 < sectors.len() {
                let block = eta_plus_between(s, &sectors[k + 1]);
                plus.extend(block.triplets().map(|(r, c, v)| (r + offsets[k + 1], c + offsets[k], v)));
            }
        }
        let eta_plus = SparseOperator::from_triplets(dim, dim, plus);
        let eta_minus = eta_plus.adjoint();
        let eta_z = SparseOperator::diagonal(&z);
        let half = Complex64::new(0.5, 0.0);
        let eta_sq = eta_plus
            .matmul(&eta_minus)
            .linear_combination(half, &eta_minus.matmul(&eta_plus), half)
            .add(&eta_z.matmul(&eta_z))
            .mark_hermitian()?;
        Ok(Self { sectors, offsets, eta_plus, eta_minus, eta_z, eta_sq })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }
}

/// Pair-creation part of the drift operator,
/// `A = sum_i (-1)^i (c†_{i,up} c†_{i+1,down} - c†_{i,down} c†_{i+1,up})`.
fn drift_pair_terms(sites: usize) -> Vec<(f64, Bilinear)> {
    ring_bonds(sites)
        .into_iter()
        .flat_map(|(i, j)| {
            let s = stagger(i);
            [
                (s, Bilinear::PairCreate(Mode::up(i), Mode::down(j))),
                (-s, Bilinear::PairCreate(Mode::down(i), Mode::up(j))),
            ]
        })
        .collect()
}

/// Local pair annihilation `B = sum_j (-1)^j c_{j,up} c_{j,down}`.
fn local_pair_annihilation_terms(sites: usize) -> Vec<(f64, Bilinear)> {
    (0..sites)
        .map(|j| (stagger(j), Bilinear::PairAnnihilate(Mode::up(j), Mode::down(j))))
        .collect()
}

/// Drift operator `Q = {A, B} + H.c.`, defined so that
/// `i [H(Φ), η²] = t_h sin(Φ) Q`.
pub fn build_q(basis: &SectorBasis) -> Result<SparseOperator> {
    require_even(basis)?;
    let sites = basis.sites();
    let dim = basis.dim();
    let a_terms = drift_pair_terms(sites);
    let b_terms = local_pair_annihilation_terms(sites);
    let mut anti = SparseOperator::zeros(dim, dim);
    // A B: through the sector with one fewer pair.
    if let Some(lower) = basis.shifted(-1) {
        let b = assemble(basis, &lower, &b_terms);
        let a = assemble(&lower, basis, &a_terms);
        anti = anti.add(&a.matmul(&b));
    }
    // B A: through the sector with one more pair.
    if let Some(upper) = basis.shifted(1) {
        let a = assemble(basis, &upper, &a_terms);
        let b = assemble(&upper, basis, &b_terms);
        anti = anti.add(&b.matmul(&a));
    }
    anti.add(&anti.adjoint()).mark_hermitian()
}

/// `<Ψ| op |Ψ>`.
pub fn expectation(op: &SparseOperator, state: &ManyBodyState) -> Result<Complex64> {
    let amps = state.amplitudes();
    if !op.is_square() || op.ncols() != amps.len() {
        return Err(Error::DimensionMismatch { expected: op.ncols(), actual: amps.len() });
    }
    let n = state.norm();
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("state not normalized (norm {n})")));
    }
    Ok(op.quadratic_form(amps))
}

/// Dimension up to which [`max_abs_eigenvalue`] diagonalizes densely.
pub const DENSE_EIGEN_LIMIT: usize = 1000;

/// Largest `|λ|` of a Hermitian operator.
pub fn max_abs_eigenvalue(op: &SparseOperator) -> Result<f64> {
    if !op.is_hermitian() {
        return Err(Error::NotHermitian);
    }
    let dim = op.nrows();
    if dim == 0 {
        return Ok(0.0);
    }
    if dim <= DENSE_EIGEN_LIMIT {
        let eig = op
            .to_dense()
            .self_adjoint_eigen(faer::Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        return Ok((0..dim).map(|k| s[k].re.abs()).fold(0.0, f64::max));
    }
    // Largest eigenvalue of A² through two sparse products per iteration.
    let square = |x: &[Complex64], y: &mut [Complex64]| {
        let mut t = vec![Complex64::new(0.0, 0.0); dim];
        op.apply(x, &mut t);
        op.apply(&t, y);
    };
    let opts = LanczosOptions { subspace: 60, ..Default::default() };
    let probe = extremal_eigenpair(
        &square,
        dim,
        Which::Highest,
        LanczosOptions { max_restarts: 0, tolerance: f64::INFINITY, ..opts },
    )?;
    // A residual of 1e-9 λ² on A² bounds the error of λ well below 1e-8 λ.
    let tolerance = 1e-9 * probe.value.max(f64::MIN_POSITIVE);
    let pair = extremal_eigenpair(&square, dim, Which::Highest, LanczosOptions { tolerance, ..opts })?;
    Ok(pair.value.max(0.0).sqrt())
}
