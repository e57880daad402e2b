//! Content-addressed JSON cache, two directory levels deep by hash prefix.

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Overrides the configured cache directory.
pub const CACHE_DIR_ENV: &str = "OPE_CACHE_DIR";

#[derive(Debug)]
pub struct Cache {
    root: PathBuf,
    pub hits: usize,
    pub misses: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Cache {
    pub fn new(root: PathBuf) -> Self {
        Cache { root, hits: 0, misses: 0 }
    }

    /// Directory from the environment, else the configured one, else `<out>/cache`.
    pub fn resolve_dir(configured: Option<&Path>, out: &Path) -> PathBuf {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => configured.map_or_else(|| out.join("cache"), Path::to_path_buf),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Hash of the canonical JSON of `key`.
    pub fn key<K: Serialize>(key: &K) -> String {
        sha256_hex(&serde_json::to_vec(key).expect("cache keys serialize"))
    }

    pub fn path_for(&self, hash: &str) -> PathBuf {
        self.root.join(&hash[..2]).join(format!("{}.json", &hash[2..]))
    }

    /// Unreadable or corrupt entries count as misses.
    pub fn get<V: DeserializeOwned>(&mut self, hash: &str) -> Option<V> {
        let v = fs::read(self.path_for(hash)).ok().and_then(|b| serde_json::from_slice(&b).ok());
        if v.is_some() {
            self.hits += 1;
        } else {
            self.misses += 1;
        }
        v
    }

    /// Writes to a temporary file in the target directory, then renames.
    pub fn put<V: Serialize>(&self, hash: &str, value: &V) -> std::io::Result<()> {
        let path = self.path_for(hash);
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!(".{}.{}.tmp", &hash[2..], std::process::id()));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&serde_json::to_vec(value).expect("cache values serialize"))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)
    }

    pub fn get_or_insert_with<V, E, F>(&mut self, hash: &str, compute: F) -> Result<V, E>
    where
        V: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<V, E>,
    {
        if let Some(v) = self.get(hash) {
            return Ok(v);
        }
        let v = compute()?;
        // A failed write only loses the cache entry.
        let _ = self.put(hash, &v);
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Cache::new(dir.path().to_path_buf());
        let h = Cache::key(&("coef", 3, "phi"));
        assert_eq!(h.len(), 64);
        assert!(c.get::<Vec<f64>>(&h).is_none());
        c.put(&h, &vec![1.5, -2.0]).unwrap();
        assert_eq!(c.get::<Vec<f64>>(&h).unwrap(), vec![1.5, -2.0]);
        assert_eq!((c.hits, c.misses), (1, 1));
        let p = c.path_for(&h);
        assert_eq!(p.parent().unwrap().file_name().unwrap().to_str().unwrap(), &h[..2]);
        let leftovers: Vec<_> = fs::read_dir(p.parent().unwrap()).unwrap().filter_map(|e| e.ok()).filter(|e| e.file_name().to_string_lossy().ends_with(".tmp")).collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn corrupt_entry_is_a_miss() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = Cache::new(dir.path().to_path_buf());
        let h = Cache::key(&"x");
        fs::create_dir_all(c.path_for(&h).parent().unwrap()).unwrap();
        fs::write(c.path_for(&h), b"{not json").unwrap();
        let v: Result<u32, ()> = c.get_or_insert_with(&h, || Ok(7));
        assert_eq!(v, Ok(7));
        assert_eq!(c.get::<u32>(&h), Some(7));
    }
}
