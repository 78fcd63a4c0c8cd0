use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EmbedError;

/// Content address of one embedding: depends only on model, dimensionality and text.
pub fn cache_key(model: &str, dimensions: usize, normalized_text: &str) -> String {
    let mut h = Sha256::new();
    h.update(model.as_bytes());
    h.update([0u8]);
    h.update(dimensions.to_string().as_bytes());
    h.update([0u8]);
    h.update(normalized_text.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    model: String,
    dimensions: usize,
    embedding: Vec<f64>,
}

/// One JSON file per cache key under a directory.
#[derive(Debug, Clone)]
pub struct EmbeddingCache {
    dir: PathBuf,
}

impl EmbeddingCache {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|source| EmbedError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        Ok(Self { dir })
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(
        &self,
        key: &str,
        model: &str,
        dimensions: usize,
    ) -> Result<Option<Vec<f64>>, EmbedError> {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(source) => {
                return Err(EmbedError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let bad = |message: String| EmbedError::Cache {
            path: path.display().to_string(),
            message,
        };
        let entry: Entry = serde_json::from_slice(&bytes).map_err(|e| bad(e.to_string()))?;
        if entry.model != model || entry.dimensions != dimensions {
            return Err(bad(format!(
                "holds {}/{} but key was computed for {model}/{dimensions}",
                entry.model, entry.dimensions
            )));
        }
        if entry.embedding.len() != dimensions {
            return Err(bad(format!(
                "vector has {} values, expected {dimensions}",
                entry.embedding.len()
            )));
        }
        Ok(Some(entry.embedding))
    }

    /// Writes atomically via a temporary file in the cache directory; concurrent
    /// writers of the same key leave one complete entry.
    pub fn put(
        &self,
        key: &str,
        model: &str,
        dimensions: usize,
        embedding: &[f64],
    ) -> Result<(), EmbedError> {
        let path = self.path(key);
        let io = |source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        };
        let entry = Entry {
            model: model.to_string(),
            dimensions,
            embedding: embedding.to_vec(),
        };
        let body = serde_json::to_vec(&entry).expect("cache entry serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        tmp.write_all(&body).map_err(io)?;
        tmp.persist(&path).map_err(|e| io(e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_separates_model_dimensions_and_text() {
        let base = cache_key("m", 3000, "text");
        assert_eq!(base, cache_key("m", 3000, "text"));
        assert_ne!(base, cache_key("m2", 3000, "text"));
        assert_ne!(base, cache_key("m", 300, "text"));
        assert_ne!(base, cache_key("m", 3000, "text "));
        assert_ne!(cache_key("ab", 1, "c"), cache_key("a", 1, "bc"));
    }

    #[test]
    fn put_then_get_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let cache = EmbeddingCache::new(dir.path()).unwrap();
        let v = vec![0.1, -1.0 / 3.0, 2.5e-17];
        cache.put("k", "m", 3, &v).unwrap();
        assert_eq!(cache.get("k", "m", 3).unwrap(), Some(v));
        assert_eq!(cache.get("absent", "m", 3).unwrap(), None);
        assert!(cache.get("k", "other", 3).is_err());
    }
}
