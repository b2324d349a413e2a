//! Content-addressed on-disk store for landscape volumes.
//!
//! Entries are `<key>.fvol` files: a `FSQCACHE <sha256>` line covering the rest of the file,
//! then an ascii volume. Anything that fails to verify is deleted and reported as a miss.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{read_volume, write_fuzzy, Encoding, Volume};
use crate::lattice::TNorm;
use crate::volume::FuzzyVolume;

pub const CACHE_DIR_ENV: &str = "FSQ_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn hex(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn hash_volume(h: &mut Sha256, v: &FuzzyVolume) {
    let g = v.geometry();
    for d in g.dims {
        h.update((d as u64).to_le_bytes());
    }
    for x in g.spacing.iter().chain(&g.origin).chain(v.values()) {
        h.update(x.to_le_bytes());
    }
}

/// Key over the input volumes, the relation name, a canonical parameter string and the t-norm.
pub fn cache_key(inputs: &[&FuzzyVolume], relation: &str, params: &str, tnorm: TNorm) -> CacheKey {
    let mut h = Sha256::new();
    h.update(b"fsq-landscape-v1\0");
    for v in inputs {
        hash_volume(&mut h, v);
    }
    for field in [relation, params, tnorm.name()] {
        h.update((field.len() as u64).to_le_bytes());
        h.update(field.as_bytes());
    }
    CacheKey(hex::encode(h.finalize()))
}

#[derive(Debug)]
pub struct LandscapeCache {
    dir: PathBuf,
    hits: AtomicUsize,
    misses: AtomicUsize,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl LandscapeCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(LandscapeCache {
            dir,
            hits: AtomicUsize::new(0),
            misses: AtomicUsize::new(0),
        })
    }

    /// Directory from the explicit flag, else from the environment; `None` disables caching.
    pub fn from_flag_or_env(flag: Option<&Path>) -> Result<Option<Self>> {
        let dir = flag
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        dir.map(LandscapeCache::open).transpose()
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn misses(&self) -> usize {
        self.misses.load(Ordering::Relaxed)
    }

    pub fn entry_path(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{key}.fvol"))
    }

    pub fn get(&self, key: &CacheKey) -> Option<FuzzyVolume> {
        let path = self.entry_path(key);
        let found = match std::fs::read(&path) {
            Ok(bytes) => match decode(&bytes, &path) {
                Some(v) => Some(v),
                None => {
                    log::warn!("evicting corrupt cache entry {}", path.display());
                    let _ = std::fs::remove_file(&path);
                    None
                }
            },
            Err(_) => None,
        };
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    /// Writes to a temporary file in the cache directory, then renames it into place.
    pub fn put(&self, key: &CacheKey, v: &FuzzyVolume) -> Result<()> {
        let mut body = Vec::new();
        write_fuzzy(v, &mut body, Encoding::Ascii).map_err(|e| Error::io(&self.dir, e))?;
        let digest = hex::encode(Sha256::digest(&body));
        let mut bytes = format!("FSQCACHE {digest}\n").into_bytes();
        bytes.extend_from_slice(&body);

        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        let dest = self.entry_path(key);
        std::fs::rename(&tmp, &dest).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::io(&dest, e)
        })
    }
}

fn decode(bytes: &[u8], path: &Path) -> Option<FuzzyVolume> {
    let nl = bytes.iter().position(|&b| b == b'\n')?;
    let head = std::str::from_utf8(&bytes[..nl]).ok()?;
    let digest = head.strip_prefix("FSQCACHE ")?;
    let body = &bytes[nl + 1..];
    if hex::encode(Sha256::digest(body)) != digest {
        return None;
    }
    match read_volume(body, &path.display().to_string()) {
        Ok(Volume::Fuzzy(v)) => Some(v),
        _ => None,
    }
}
