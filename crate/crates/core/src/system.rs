//! One physical system: basis, Hamiltonian family, η operators, `Q` and
//! their extreme eigenvalues, built once and shared read-only.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::SectorBasis;
use crate::cache::{self, CacheKey};
use crate::error::{Error, Result};
use crate::operators::{build_q, max_abs_eigenvalue, EtaOperators, HamiltonianFamily};
use crate::sparse::SparseOperator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams {
    #[serde(rename = "L", alias = "sites")]
    pub sites: usize,
    #[serde(rename = "U", alias = "interaction")]
    pub interaction: f64,
    #[serde(rename = "t_h", alias = "hopping", default = "default_hopping")]
    pub hopping: f64,
    /// Defaults to half filling.
    #[serde(default)]
    pub n_up: Option<usize>,
    #[serde(default)]
    pub n_down: Option<usize>,
}

fn default_hopping() -> f64 {
    1.0
}

impl Default for SystemParams {
    fn default() -> Self {
        Self { sites: 8, interaction: 20.0, hopping: 1.0, n_up: None, n_down: None }
    }
}

impl SystemParams {
    pub fn new(sites: usize, interaction: f64, hopping: f64) -> Self {
        Self { sites, interaction, hopping, n_up: None, n_down: None }
    }

    pub fn n_up(&self) -> usize {
        self.n_up.unwrap_or(self.sites / 2)
    }

    pub fn n_down(&self) -> usize {
        self.n_down.unwrap_or(self.sites / 2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 || self.sites > crate::basis::MAX_SITES {
            return Err(Error::Config(format!("L = {} outside 1..={}", self.sites, crate::basis::MAX_SITES)));
        }
        if self.sites % 2 != 0 {
            return Err(Error::OddRing(self.sites));
        }
        if !self.interaction.is_finite() || !self.hopping.is_finite() || self.hopping == 0.0 {
            return Err(Error::Config("U must be finite and t_h finite and nonzero".into()));
        }
        if self.n_up() > self.sites || self.n_down() > self.sites {
            return Err(Error::EmptySector { sites: self.sites, n_up: self.n_up(), n_down: self.n_down() });
        }
        Ok(())
    }

    pub fn cache_key(&self, kind: &str) -> CacheKey {
        CacheKey {
            kind: kind.to_string(),
            sites: self.sites,
            n_up: self.n_up(),
            n_down: self.n_down(),
            hopping: self.hopping,
            interaction: self.interaction,
        }
    }
}

/// Provenance of a cache file used by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct System {
    pub params: SystemParams,
    pub basis: SectorBasis,
    pub family: HamiltonianFamily,
    pub eta: EtaOperators,
    pub q: SparseOperator,
    /// Largest `|λ|` of `Q`.
    pub q_max: f64,
    /// Largest eigenvalue of `η²` on the sector.
    pub eta_sq_max: f64,
    pub caches: Vec<CacheRecord>,
}

impl System {
    /// Builds all operators; `Q_max` and `η²_max` are read from or stored
    /// in `cache_dir` when given.
    pub fn build(params: SystemParams, cache_dir: Option<&Path>) -> Result<Self> {
        params.validate()?;
        let basis = SectorBasis::new(params.sites, params.n_up(), params.n_down())?;
        let family = HamiltonianFamily::build(&basis, params.hopping, params.interaction);
        let eta = EtaOperators::build(&basis)?;
        let q = build_q(&basis)?;
        let compute = || -> Result<Vec<f64>> {
            Ok(vec![max_abs_eigenvalue(&q)?, max_abs_eigenvalue(&eta.eta_sq)?])
        };
        let mut caches = Vec::new();
        let extremes = match cache_dir {
            Some(dir) => {
                let entry = cache::load_or_build(dir, &params.cache_key("extremes"), compute)?;
                caches.push(CacheRecord { path: entry.path, sha256: entry.header.payload_sha256 });
                entry.payload
            }
            None => compute()?,
        };
        if extremes.len() != 2 || extremes.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Cache {
                path: cache_dir.map(Path::to_path_buf).unwrap_or_default(),
                reason: "malformed extreme-eigenvalue payload; delete the file to rebuild it".into(),
            });
        }
        Ok(Self {
            params,
            basis,
            family,
            eta,
            q,
            q_max: extremes[0],
            eta_sq_max: extremes[1],
            caches,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn sites(&self) -> usize {
        self.basis.sites()
    }
}
