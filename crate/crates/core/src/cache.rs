//! Self-describing binary cache files for derived spectral data.
//!
//! Layout: the 8-byte magic, a little-endian `u32` header length, a JSON
//! [`CacheHeader`], then the payload as little-endian `f64`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::basis::INDEX_LAYOUT;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"ETAPAIR\0";
pub const FORMAT_VERSION: u32 = 1;

/// Physical identity of cached data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheKey {
    pub kind: String,
    pub sites: usize,
    pub n_up: usize,
    pub n_down: usize,
    pub hopping: f64,
    pub interaction: f64,
}

impl CacheKey {
    pub fn file_name(&self) -> String {
        format!(
            "{}_L{}_up{}_dn{}_t{}_U{}.bin",
            self.kind, self.sites, self.n_up, self.n_down, self.hopping, self.interaction
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheHeader {
    pub version: u32,
    pub layout: String,
    #[serde(flatten)]
    pub key: CacheKey,
    pub payload_len: usize,
    pub payload_sha256: String,
}

/// A loaded or freshly written cache entry.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub path: PathBuf,
    pub header: CacheHeader,
    pub payload: Vec<f64>,
}

fn payload_bytes(payload: &[f64]) -> Vec<u8> {
    payload.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn stale(path: &Path, reason: impl Into<String>) -> Error {
    Error::Cache {
        path: path.to_path_buf(),
        reason: format!("{}; delete the file to rebuild it", reason.into()),
    }
}

pub fn write(path: &Path, key: &CacheKey, payload: &[f64]) -> Result<CacheEntry> {
    let bytes = payload_bytes(payload);
    let header = CacheHeader {
        version: FORMAT_VERSION,
        layout: INDEX_LAYOUT.to_string(),
        key: key.clone(),
        payload_len: payload.len(),
        payload_sha256: digest(&bytes),
    };
    let json = serde_json::to_vec(&header)?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    {
        let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
        f.write_all(MAGIC)?;
        f.write_all(&(json.len() as u32).to_le_bytes())?;
        f.write_all(&json)?;
        f.write_all(&bytes)?;
        f.flush()?;
    }
    fs::rename(&tmp, path)?;
    Ok(CacheEntry { path: path.to_path_buf(), header, payload: payload.to_vec() })
}

/// `Ok(None)` when the file does not exist; an error when it exists but
/// does not match `key`, the format version or the index layout.
pub fn read(path: &Path, key: &CacheKey) -> Result<Option<CacheEntry>> {
    let mut f = match fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut magic = [0u8; 8];
    f.read_exact(&mut magic).map_err(|_| stale(path, "truncated file"))?;
    if &magic != MAGIC {
        return Err(stale(path, "not a cache file"));
    }
    let mut len = [0u8; 4];
    f.read_exact(&mut len).map_err(|_| stale(path, "truncated header"))?;
    let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
    f.read_exact(&mut json).map_err(|_| stale(path, "truncated header"))?;
    let header: CacheHeader =
        serde_json::from_slice(&json).map_err(|e| stale(path, format!("unreadable header: {e}")))?;
    if header.version != FORMAT_VERSION {
        return Err(stale(path, format!("format version {} (expected {FORMAT_VERSION})", header.version)));
    }
    if header.layout != INDEX_LAYOUT {
        return Err(stale(path, format!("index layout '{}' (expected '{INDEX_LAYOUT}')", header.layout)));
    }
    if header.key != *key {
        return Err(stale(path, format!("built for {:?}, requested {:?}", header.key, key)));
    }
    let mut bytes = Vec::with_capacity(header.payload_len * 8);
    f.read_to_end(&mut bytes)?;
    if bytes.len() != header.payload_len * 8 {
        return Err(stale(path, "payload length mismatch"));
    }
    if digest(&bytes) != header.payload_sha256 {
        return Err(stale(path, "payload checksum mismatch"));
    }
    let payload = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(Some(CacheEntry { path: path.to_path_buf(), header, payload }))
}

/// Reads the entry for `key` under `dir`, computing and storing it on a miss.
pub fn load_or_build(
    dir: &Path,
    key: &CacheKey,
    build: impl FnOnce() -> Result<Vec<f64>>,
) -> Result<CacheEntry> {
    let path = dir.join(key.file_name());
    if let Some(entry) = read(&path, key)? {
        log::debug!("cache hit {}", path.display());
        return Ok(entry);
    }
    log::info!("building {}", path.display());
    let payload = build()?;
    write(&path, key, &payload)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> CacheKey {
        CacheKey { kind: "scalars".into(), sites: 4, n_up: 2, n_down: 2, hopping: 1.0, interaction: 20.0 }
    }

    #[test]
    fn round_trip_and_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(key().file_name());
        assert!(read(&path, &key()).unwrap().is_none());
        write(&path, &key(), &[1.5, -2.0]).unwrap();
        assert_eq!(read(&path, &key()).unwrap().unwrap().payload, vec![1.5, -2.0]);

        let other = CacheKey { interaction: 10.0, ..key() };
        assert!(matches!(read(&path, &other), Err(Error::Cache { .. })));

        let mut raw = fs::read(&path).unwrap();
        *raw.last_mut().unwrap() ^= 1;
        fs::write(&path, raw).unwrap();
        let err = read(&path, &key()).unwrap_err().to_string();
        assert!(err.contains("checksum") && err.contains("delete"), "{err}");
    }
}
