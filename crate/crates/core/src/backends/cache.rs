//! Disk cache for completions: one JSON file per key, written via temp file
//! plus atomic rename so concurrent writers can never leave torn entries.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::BackendError;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "TUTOR_ALIGN_CACHE_DIR";

const DEFAULT_CACHE_DIR: &str = ".tutor-align-cache";

/// Precedence: explicit argument, then `TUTOR_ALIGN_CACHE_DIR`, then the
/// default directory under the working directory.
pub fn resolve_cache_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(dir) = explicit {
        return dir.to_path_buf();
    }
    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    PathBuf::from(DEFAULT_CACHE_DIR)
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    request_digest: String,
    model_name: String,
    response: String,
    created_unix: u64,
}

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: PathBuf) -> Self {
        Self { dir }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<String>, BackendError> {
        let path = self.entry_path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(BackendError::Cache {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let entry: CacheEntry =
            serde_json::from_str(&text).map_err(|e| BackendError::Cache {
                path: path.display().to_string(),
                source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
            })?;
        Ok(Some(entry.response))
    }

    pub fn put(&self, key: &str, model_name: &str, response: &str) -> Result<(), BackendError> {
        let wrap = |path: &Path, source: std::io::Error| BackendError::Cache {
            path: path.display().to_string(),
            source,
        };
        std::fs::create_dir_all(&self.dir).map_err(|e| wrap(&self.dir, e))?;
        let entry = CacheEntry {
            request_digest: key.to_string(),
            model_name: model_name.to_string(),
            response: response.to_string(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        let body = serde_json::to_string(&entry).expect("cache entry serializes");
        let final_path = self.entry_path(key);
        static WRITE_SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
        let unique = WRITE_SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        let tmp_path = self
            .dir
            .join(format!("{key}.tmp.{}.{unique}", std::process::id()));
        std::fs::write(&tmp_path, body).map_err(|e| wrap(&tmp_path, e))?;
        std::fs::rename(&tmp_path, &final_path).map_err(|e| wrap(&final_path, e))?;
        Ok(())
    }
}
