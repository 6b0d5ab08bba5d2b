//! Fixed-particle-number determinant basis of a periodic Hubbard chain.
//!
//! A many-body basis state is a pair of occupation masks, one per spin
//! species. Bit `i` of a mask is set when site `i` is occupied.
//!
//! Fermionic modes are ordered with every spin-up mode before every
//! spin-down mode, sites ascending within a species:
//!
//! ```text
//! (0,up) (1,up) ... (L-1,up) (0,down) (1,down) ... (L-1,down)
//! ```
//!
//! A creation or annihilation operator on a mode picks up the sign
//! `(-1)^k`, where `k` is the number of occupied modes preceding it in this
//! ordering. Composite states are indexed up-major:
//! `index = up_ordinal * down_dets.len() + down_ordinal`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest chain length representable by the mask layout.
pub const MAX_SITES: usize = 16;

/// Tag identifying the index layout; persisted in cache headers.
pub const INDEX_LAYOUT: &str = "up-major/jw-up-then-down/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spin {
    Up,
    Down,
}

/// A single fermionic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mode {
    pub site: usize,
    pub spin: Spin,
}

impl Mode {
    pub fn up(site: usize) -> Self {
        Self { site, spin: Spin::Up }
    }

    pub fn down(site: usize) -> Self {
        Self { site, spin: Spin::Down }
    }
}

/// Occupation masks of both spin species.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Determinant {
    pub up: u32,
    pub down: u32,
}

impl Determinant {
    pub fn new(up: u32, down: u32) -> Self {
        Self { up, down }
    }

    pub fn is_occupied(&self, mode: Mode) -> bool {
        let mask = match mode.spin {
            Spin::Up => self.up,
            Spin::Down => self.down,
        };
        mask >> mode.site & 1 == 1
    }

    /// Number of doubly occupied sites.
    pub fn doublons(&self) -> u32 {
        (self.up & self.down).count_ones()
    }

    /// Jordan-Wigner parity of the modes preceding `mode`.
    fn sign_before(&self, mode: Mode) -> f64 {
        let below = (1u32 << mode.site) - 1;
        let crossed = match mode.spin {
            Spin::Up => (self.up & below).count_ones(),
            Spin::Down => self.up.count_ones() + (self.down & below).count_ones(),
        };
        if crossed % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    fn flip(&self, mode: Mode) -> Self {
        let bit = 1u32 << mode.site;
        match mode.spin {
            Spin::Up => Self::new(self.up ^ bit, self.down),
            Spin::Down => Self::new(self.up, self.down ^ bit),
        }
    }

    /// `c†_mode |self>`; `None` when the mode is already occupied.
    pub fn create(&self, mode: Mode) -> Option<(Self, f64)> {
        if self.is_occupied(mode) {
            return None;
        }
        Some((self.flip(mode), self.sign_before(mode)))
    }

    /// `c_mode |self>`; `None` when the mode is empty.
    pub fn annihilate(&self, mode: Mode) -> Option<(Self, f64)> {
        if !self.is_occupied(mode) {
            return None;
        }
        Some((self.flip(mode), self.sign_before(mode)))
    }

    /// Applies a fermionic bilinear. Returns the image determinant and its
    /// sign, or `None` when the bilinear annihilates the state.
    pub fn apply(&self, op: Bilinear) -> Option<(Self, f64)> {
        match op {
            Bilinear::Hop { spin, to, from } => {
                let (d, s1) = self.annihilate(Mode { site: from, spin })?;
                let (d, s2) = d.create(Mode { site: to, spin })?;
                Some((d, s1 * s2))
            }
            Bilinear::PairCreate(a, b) => {
                let (d, s1) = self.create(b)?;
                let (d, s2) = d.create(a)?;
                Some((d, s1 * s2))
            }
            Bilinear::PairAnnihilate(a, b) => {
                let (d, s1) = self.annihilate(b)?;
                let (d, s2) = d.annihilate(a)?;
                Some((d, s1 * s2))
            }
            Bilinear::Density(mode) => self.is_occupied(mode).then_some((*self, 1.0)),
        }
    }
}

/// Fermionic bilinears acting on a determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bilinear {
    /// `c†_{to,σ} c_{from,σ}`
    Hop { spin: Spin, to: usize, from: usize },
    /// `c†_a c†_b`
    PairCreate(Mode, Mode),
    /// `c_a c_b`
    PairAnnihilate(Mode, Mode),
    /// `n_mode`
    Density(Mode),
}

impl Bilinear {
    fn modes(&self) -> [Mode; 2] {
        match *self {
            Bilinear::Hop { spin, to, from } => [Mode { site: to, spin }, Mode { site: from, spin }],
            Bilinear::PairCreate(a, b) | Bilinear::PairAnnihilate(a, b) => [a, b],
            Bilinear::Density(m) => [m, m],
        }
    }
}

/// All `sites`-bit masks with exactly `count` bits set, ascending.
fn masks_with_popcount(sites: usize, count: usize) -> Vec<u32> {
    (0u32..(1u32 << sites))
        .filter(|m| m.count_ones() as usize == count)
        .collect()
}

/// Binomial coefficient.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Determinant basis of the sector with fixed `(n_up, n_down)` on `sites`
/// sites.
#[derive(Debug, Clone)]
pub struct SectorBasis {
    sites: usize,
    n_up: usize,
    n_down: usize,
    up_dets: Vec<u32>,
    down_dets: Vec<u32>,
    up_index: HashMap<u32, usize>,
    down_index: HashMap<u32, usize>,
}

impl SectorBasis {
    pub fn new(sites: usize, n_up: usize, n_down: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::InvalidArgument(format!(
                "chain length {sites} outside 1..={MAX_SITES}"
            )));
        }
        if n_up > sites || n_down > sites {
            return Err(Error::EmptySector { sites, n_up, n_down });
        }
        let up_dets = masks_with_popcount(sites, n_up);
        let down_dets = masks_with_popcount(sites, n_down);
        let index = |dets: &[u32]| dets.iter().enumerate().map(|(k, &m)| (m, k)).collect();
        Ok(Self {
            up_index: index(&up_dets),
            down_index: index(&down_dets),
            sites,
            n_up,
            n_down,
            up_dets,
            down_dets,
        })
    }

    /// Half-filled spin-balanced sector `(L/2, L/2)`.
    pub fn half_filled(sites: usize) -> Result<Self> {
        if sites % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "half filling needs an even chain length, got {sites}"
            )));
        }
        Self::new(sites, sites / 2, sites / 2)
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn n_up(&self) -> usize {
        self.n_up
    }

    pub fn n_down(&self) -> usize {
        self.n_down
    }

    pub fn dim(&self) -> usize {
        self.up_dets.len() * self.down_dets.len()
    }

    pub fn up_dets(&self) -> &[u32] {
        &self.up_dets
    }

    pub fn down_dets(&self) -> &[u32] {
        &self.down_dets
    }

    pub fn det(&self, index: usize) -> Determinant {
        let nd = self.down_dets.len();
        Determinant::new(self.up_dets[index / nd], self.down_dets[index % nd])
    }

    pub fn index(&self, det: Determinant) -> Option<usize> {
        let u = self.up_index.get(&det.up)?;
        let d = self.down_index.get(&det.down)?;
        Some(u * self.down_dets.len() + d)
    }

    pub fn dets(&self) -> impl Iterator<Item = Determinant> + '_ {
        (0..self.dim()).map(|k| self.det(k))
    }

    /// Sector reached by adding `delta` particles of each spin, if nonempty.
    pub fn shifted(&self, delta: isize) -> Option<SectorBasis> {
        let up = self.n_up as isize + delta;
        let down = self.n_down as isize + delta;
        if up < 0 || down < 0 || up as usize > self.sites || down as usize > self.sites {
            return None;
        }
        SectorBasis::new(self.sites, up as usize, down as usize).ok()
    }

    /// Bounds-checked [`Determinant::apply`].
    pub fn apply_bilinear(&self, op: Bilinear, det: Determinant) -> Result<Option<(Determinant, f64)>> {
        for m in op.modes() {
            if m.site >= self.sites {
                return Err(Error::InvalidArgument(format!(
                    "site {} outside chain of length {}",
                    m.site, self.sites
                )));
            }
        }
        Ok(det.apply(op))
    }
}
