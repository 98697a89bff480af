//! Append-only response cache keyed by `(model identity, prompt)`.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::client::sha256_hex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub key_hash: String,
    pub model: String,
    pub prompt_sha: String,
    pub response: String,
    pub ts: u64,
}

/// Concurrent reads, serialized appends. An existing key is never
/// overwritten, so repeated lookups return the first stored response.
#[derive(Debug, Default)]
pub struct ExtractionCache {
    entries: RwLock<HashMap<String, String>>,
    sink: Option<(PathBuf, Mutex<File>)>,
}

impl ExtractionCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Open (creating if needed) a cache file and load its records.
    pub fn open(path: &Path) -> Result<Self> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: CacheRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::Cache(format!("{} line {}: {e}", path.display(), i + 1)))?;
                entries.entry(rec.key_hash).or_insert(rec.response);
            }
        } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            entries: RwLock::new(entries),
            sink: Some((path.to_path_buf(), Mutex::new(file))),
        })
    }

    pub fn key(model: &str, prompt: &str) -> String {
        sha256_hex(&format!("{model}\u{0}{prompt}"))
    }

    pub fn get(&self, model: &str, prompt: &str) -> Option<String> {
        self.entries
            .read()
            .expect("cache lock poisoned")
            .get(&Self::key(model, prompt))
            .cloned()
    }

    /// Returns `false` when the key was already present (nothing written).
    pub fn insert(&self, model: &str, prompt: &str, response: &str) -> Result<bool> {
        let key = Self::key(model, prompt);
        let mut entries = self.entries.write().expect("cache lock poisoned");
        if entries.contains_key(&key) {
            return Ok(false);
        }
        if let Some((path, file)) = &self.sink {
            let rec = CacheRecord {
                key_hash: key.clone(),
                model: model.to_string(),
                prompt_sha: sha256_hex(prompt),
                response: response.to_string(),
                ts: SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            };
            let line = serde_json::to_string(&rec).map_err(|e| Error::Serde(e.to_string()))?;
            let mut f = file.lock().expect("cache file lock poisoned");
            writeln!(f, "{line}").map_err(|e| Error::io(path, e))?;
            f.flush().map_err(|e| Error::io(path, e))?;
        }
        entries.insert(key, response.to_string());
        Ok(true)
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_write_wins() {
        let c = ExtractionCache::in_memory();
        assert!(c.insert("m", "p", "one").unwrap());
        assert!(!c.insert("m", "p", "two").unwrap());
        assert_eq!(c.get("m", "p").as_deref(), Some("one"));
        assert_eq!(c.get("other-model", "p"), None);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let c = ExtractionCache::open(&path).unwrap();
            c.insert("m", "p1", "r1").unwrap();
            c.insert("m", "p2", "r2\nsecond line").unwrap();
        }
        let c = ExtractionCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("m", "p2").as_deref(), Some("r2\nsecond line"));
        let body = fs::read_to_string(&path).unwrap();
        let rec: CacheRecord = serde_json::from_str(body.lines().next().unwrap()).unwrap();
        assert_eq!(rec.prompt_sha, sha256_hex("p1"));
        assert_eq!(rec.key_hash, ExtractionCache::key("m", "p1"));
    }
}
