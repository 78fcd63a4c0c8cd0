//! Embedding acquisition from an OpenAI-compatible service, with an on-disk
//! cache keyed by model, dimensionality and normalized text.

mod cache;
mod client;
mod matrix;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{normalize_text, Corpus};

pub use cache::{cache_key, EmbeddingCache};
pub use client::{EmbeddingProvider, HttpProvider, RetryPolicy};
pub use matrix::{
    load_matrix, load_matrix_for, save_matrix, EmbeddingMatrix, MEAN_TOLERANCE, NORM_TOLERANCE,
};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("invalid embedding config: {0}")]
    Config(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("HTTP {status} from embedding service: {body}")]
    Http { status: u16, body: String },
    #[error("embedding service rejected the API key (HTTP {status})")]
    Auth { status: u16 },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed service response: {0}")]
    Response(String),
    #[error("statement ref {ref_num}: service returned {found} dimensions, expected {expected}")]
    DimensionMismatch {
        ref_num: usize,
        expected: usize,
        found: usize,
    },
    #[error("batch failed for refs {refs:?}: {cause}")]
    Batch {
        refs: Vec<usize>,
        #[source]
        cause: Box<EmbedError>,
    },
    #[error("no embedding returned for refs {0:?}")]
    Partial(Vec<usize>),
    #[error("cache entry {path}: {message}")]
    Cache { path: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row}, column {column}: `{cell}` is not a number")]
    NonNumeric {
        row: usize,
        column: usize,
        cell: String,
    },
    #[error("row {row}, column {column}: value is NaN or infinite")]
    NonFinite { row: usize, column: usize },
    #[error("column {column} has norm {norm}, expected 1")]
    NotUnitNorm { column: usize, norm: f64 },
    #[error("column {column} is the zero vector")]
    ZeroVector { column: usize },
    #[error("matrix shape: {0}")]
    Shape(String),
}

/// Service and cache settings for embedding acquisition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub dimensions: usize,
    pub api_key_env: String,
    pub cache_dir: PathBuf,
    pub batch_size: usize,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1".into(),
            model_name: "text-embedding-3-large".into(),
            dimensions: 3000,
            api_key_env: "OPENAI_API_KEY".into(),
            cache_dir: PathBuf::from(".crossmap-cache"),
            batch_size: 64,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dimensions < 2 {
            return Err(EmbedError::Config(format!(
                "dimensions must be at least 2, got {}",
                self.dimensions
            )));
        }
        if self.batch_size == 0 {
            return Err(EmbedError::Config("batch_size must be at least 1".into()));
        }
        if self.model_name.trim().is_empty() {
            return Err(EmbedError::Config("model_name is empty".into()));
        }
        Ok(())
    }
}

/// Embeds every statement of `corpus`, contacting the HTTP service only for
/// cache misses. The API key is read only when a miss exists.
pub fn fetch_embeddings(
    corpus: &Corpus,
    cfg: &EmbeddingConfig,
) -> Result<EmbeddingMatrix, EmbedError> {
    fetch_with(corpus, cfg, || {
        HttpProvider::from_env(cfg).map(|p| Box::new(p) as Box<dyn EmbeddingProvider>)
    })
}

/// Like [`fetch_embeddings`] with an explicit provider for cache misses.
pub fn fetch_embeddings_with(
    corpus: &Corpus,
    cfg: &EmbeddingConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingMatrix, EmbedError> {
    fetch_with(corpus, cfg, || {
        Ok(Box::new(provider) as Box<dyn EmbeddingProvider + '_>)
    })
}

fn fetch_with<'p>(
    corpus: &Corpus,
    cfg: &EmbeddingConfig,
    make_provider: impl FnOnce() -> Result<Box<dyn EmbeddingProvider + 'p>, EmbedError>,
) -> Result<EmbeddingMatrix, EmbedError> {
    cfg.validate()?;
    let cache = EmbeddingCache::new(&cfg.cache_dir)?;

    let texts: Vec<String> = corpus
        .statements()
        .iter()
        .map(|s| normalize_text(&s.text))
        .collect();
    let keys: Vec<String> = texts
        .iter()
        .map(|t| cache_key(&cfg.model_name, cfg.dimensions, t))
        .collect();

    let mut vectors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    // key -> (text, refs sharing that text)
    let mut misses: BTreeMap<String, (String, Vec<usize>)> = BTreeMap::new();
    for (k, (key, text)) in keys.iter().zip(&texts).enumerate() {
        if vectors.contains_key(key) {
            continue;
        }
        match cache.get(key, &cfg.model_name, cfg.dimensions)? {
            Some(v) => {
                vectors.insert(key.clone(), v);
            }
            None => misses
                .entry(key.clone())
                .or_insert_with(|| (text.clone(), Vec::new()))
                .1
                .push(k + 1),
        }
    }

    if !misses.is_empty() {
        let provider = make_provider()?;
        let pending: Vec<(String, String, Vec<usize>)> = misses
            .into_iter()
            .map(|(key, (text, refs))| (key, text, refs))
            .collect();
        for batch in pending.chunks(cfg.batch_size) {
            let inputs: Vec<String> = batch.iter().map(|(_, t, _)| t.clone()).collect();
            let batch_refs = || -> Vec<usize> {
                batch.iter().flat_map(|(_, _, r)| r.iter().copied()).collect()
            };
            let out = provider
                .embed(&cfg.model_name, cfg.dimensions, &inputs)
                .map_err(|cause| EmbedError::Batch {
                    refs: batch_refs(),
                    cause: Box::new(cause),
                })?;
            if out.len() < batch.len() {
                let missing = batch[out.len()..]
                    .iter()
                    .flat_map(|(_, _, r)| r.iter().copied())
                    .collect();
                return Err(EmbedError::Partial(missing));
            }
            for ((key, _, refs), v) in batch.iter().zip(out) {
                if v.len() != cfg.dimensions {
                    return Err(EmbedError::DimensionMismatch {
                        ref_num: refs[0],
                        expected: cfg.dimensions,
                        found: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::Response(format!(
                        "non-finite value in embedding for ref {}",
                        refs[0]
                    )));
                }
                cache.put(key, &cfg.model_name, cfg.dimensions, &v)?;
                vectors.insert(key.clone(), v);
            }
        }
    }

    let columns = keys.iter().map(|k| vectors[k].clone()).collect();
    let mat = EmbeddingMatrix::normalized(corpus.side(), corpus.refs(), columns)?;
    for (col, mean) in mat.off_center_columns() {
        log::warn!(
            "{} ref {col}: column mean {mean:.4} exceeds {MEAN_TOLERANCE}",
            corpus.side()
        );
    }
    Ok(mat)
}
