use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmbedError, EmbeddingConfig};

/// Source of raw embedding vectors for a batch of texts, in input order.
pub trait EmbeddingProvider {
    fn embed(
        &self,
        model: &str,
        dimensions: usize,
        texts: &[String],
    ) -> Result<Vec<Vec<f64>>, EmbedError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn embed(
        &self,
        model: &str,
        dimensions: usize,
        texts: &[String],
    ) -> Result<Vec<Vec<f64>>, EmbedError> {
        (**self).embed(model, dimensions, texts)
    }
}

/// Attempts and exponential backoff for retryable failures (429, 5xx, transport).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            initial_backoff: Duration::from_secs(1),
        }
    }
}

#[derive(Serialize)]
struct Request<'a> {
    model: &'a str,
    input: &'a [String],
    dimensions: usize,
}

#[derive(Deserialize)]
struct Response {
    data: Vec<Datum>,
}

#[derive(Deserialize)]
struct Datum {
    #[serde(default)]
    index: Option<usize>,
    embedding: Vec<f64>,
}

/// Client for `POST {endpoint}/embeddings`.
pub struct HttpProvider {
    agent: ureq::Agent,
    url: String,
    api_key: String,
    retry: RetryPolicy,
}

impl HttpProvider {
    pub fn new(endpoint_url: &str, api_key: String) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self {
            agent,
            url: format!("{}/embeddings", endpoint_url.trim_end_matches('/')),
            api_key,
            retry: RetryPolicy::default(),
        }
    }

    /// Reads the API key from the environment variable named in `cfg`.
    pub fn from_env(cfg: &EmbeddingConfig) -> Result<Self, EmbedError> {
        let key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| EmbedError::MissingApiKey(cfg.api_key_env.clone()))?;
        Ok(Self::new(&cfg.endpoint_url, key))
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    fn attempt(&self, body: &Request<'_>) -> Result<Vec<Vec<f64>>, EmbedError> {
        let mut resp = self
            .agent
            .post(&self.url)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body)
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 401 || status == 403 {
            return Err(EmbedError::Auth { status });
        }
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(EmbedError::Http { status, body });
        }
        let parsed: Response = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmbedError::Response(e.to_string()))?;
        let mut data = parsed.data;
        if data.iter().all(|d| d.index.is_some()) {
            data.sort_by_key(|d| d.index);
        }
        Ok(data.into_iter().map(|d| d.embedding).collect())
    }
}

fn retryable(err: &EmbedError) -> bool {
    match err {
        EmbedError::Http { status, .. } => *status == 429 || *status >= 500,
        EmbedError::Transport(_) => true,
        _ => false,
    }
}

impl EmbeddingProvider for HttpProvider {
    fn embed(
        &self,
        model: &str,
        dimensions: usize,
        texts: &[String],
    ) -> Result<Vec<Vec<f64>>, EmbedError> {
        let body = Request {
            model,
            input: texts,
            dimensions,
        };
        let mut backoff = self.retry.initial_backoff;
        let mut attempt = 1;
        loop {
            match self.attempt(&body) {
                Err(e) if retryable(&e) && attempt < self.retry.attempts => {
                    log::warn!("embedding request attempt {attempt} failed: {e}; retrying");
                    std::thread::sleep(backoff);
                    backoff *= 2;
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
