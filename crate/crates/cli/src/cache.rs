//! On-disk cache of expensive pieces, keyed by config hash and piece name.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::config::hex_digest;

/// Environment variable naming the cache directory; unset disables caching.
pub const CACHE_ENV: &str = "TNK_CACHE_DIR";

#[derive(Debug, Clone, Default)]
pub struct Cache {
    dir: Option<PathBuf>,
}

impl Cache {
    pub fn disabled() -> Self {
        Self { dir: None }
    }

    pub fn at(dir: impl Into<PathBuf>) -> Self {
        Self { dir: Some(dir.into()) }
    }

    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_ENV) {
            Some(d) if !d.is_empty() => Self::at(d),
            _ => Self::disabled(),
        }
    }

    pub fn dir(&self) -> Option<&PathBuf> {
        self.dir.as_ref()
    }

    fn path(&self, config_hash: &str, piece: &str) -> Option<PathBuf> {
        let key = hex_digest(format!("{config_hash}/{piece}").as_bytes());
        self.dir.as_ref().map(|d| d.join(format!("{piece}-{}.json", &key[..16])))
    }

    pub fn load<T: DeserializeOwned>(&self, config_hash: &str, piece: &str) -> Option<T> {
        let path = self.path(config_hash, piece)?;
        let text = fs::read_to_string(path).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn store<T: Serialize>(&self, config_hash: &str, piece: &str, value: &T) -> Result<()> {
        let Some(path) = self.path(config_hash, piece) else {
            return Ok(());
        };
        let dir = path.parent().expect("cache path has a parent");
        fs::create_dir_all(dir).with_context(|| format!("creating cache dir {}", dir.display()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_string(value)?)?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    /// Returns the cached value or computes and stores it; the flag is `true` on a hit.
    pub fn get_or_compute<T, F>(&self, config_hash: &str, piece: &str, f: F) -> Result<(T, bool)>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T>,
    {
        if let Some(v) = self.load(config_hash, piece) {
            return Ok((v, true));
        }
        let v = f()?;
        self.store(config_hash, piece, &v)?;
        Ok((v, false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let c = Cache::at(dir.path());
        let x = vec![0.1_f64 + 0.2, 1.0 / 3.0, 1e-300];
        let (a, hit) = c.get_or_compute("h", "p", || Ok(x.clone())).unwrap();
        assert!(!hit);
        let (b, hit): (Vec<f64>, bool) = c.get_or_compute("h", "p", || unreachable!()).unwrap();
        assert!(hit);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn disabled_always_computes() {
        let c = Cache::disabled();
        let (_, hit) = c.get_or_compute("h", "p", || Ok(1)).unwrap();
        assert!(!hit);
        let (_, hit) = c.get_or_compute("h", "p", || Ok(1)).unwrap();
        assert!(!hit);
    }
}
