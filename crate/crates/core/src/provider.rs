//! JSON-over-HTTP clients for the embedding-similarity and LM
//! log-probability services.
//!
//! `POST {base}/cosine` takes `{"a", "b"}` and answers `{"cosine"}`.
//! `POST {base}/logprob` takes `{"pre", "gt", "post"}` and answers either
//! `{"logp_conditional"}` or `{"logp_full", "logp_context"}`.
//!
//! Calls are retried with exponential backoff inside a wall-clock budget of
//! `(retries + 1) * timeout`, cached per input for the lifetime of the
//! client, and capped at a fixed number of in-flight requests.

use std::collections::HashMap;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::ucsm::{ContextProvider, SemanticProvider};

pub const EMBED_URL_ENV: &str = "UCSM_EMBED_URL";
pub const LM_URL_ENV: &str = "UCSM_LM_URL";
pub const DEFAULT_TIMEOUT_MS: u64 = 5000;
pub const DEFAULT_RETRIES: u32 = 2;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 8;
const BACKOFF_BASE: Duration = Duration::from_millis(50);

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("timeout must be positive")]
    ZeroTimeout,
    #[error("request failed: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Unavailable { attempts: u32, last: Box<ProviderError> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderEndpoint {
    pub base_url: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl ProviderEndpoint {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            timeout: Duration::from_millis(DEFAULT_TIMEOUT_MS),
            max_retries: DEFAULT_RETRIES,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Result<Self, ProviderError> {
        if timeout.is_zero() {
            return Err(ProviderError::ZeroTimeout);
        }
        self.timeout = timeout;
        Ok(self)
    }

    pub fn with_retries(mut self, max_retries: u32) -> Self {
        self.max_retries = max_retries;
        self
    }

    /// Endpoint from an environment variable, if set and non-empty.
    pub fn from_env(var: &str) -> Option<Self> {
        std::env::var(var).ok().filter(|v| !v.trim().is_empty()).map(Self::new)
    }

    /// Upper bound on the wall time of one call including retries.
    pub fn budget(&self) -> Duration {
        self.timeout * (self.max_retries + 1)
    }
}

struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap();
        while *free == 0 {
            free = self.cv.wait(free).unwrap();
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum CacheKey {
    Cosine(String, String),
    LogProb(String, String, String),
}

/// Shared transport: retries, cache and in-flight cap.
pub struct HttpProvider {
    endpoint: ProviderEndpoint,
    agent: ureq::Agent,
    cache: Mutex<HashMap<CacheKey, f64>>,
    gate: Gate,
}

impl HttpProvider {
    pub fn new(endpoint: ProviderEndpoint) -> Self {
        Self::with_max_in_flight(endpoint, DEFAULT_MAX_IN_FLIGHT)
    }

    pub fn with_max_in_flight(endpoint: ProviderEndpoint, max_in_flight: usize) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(true).build().into();
        Self { endpoint, agent, cache: Mutex::new(HashMap::new()), gate: Gate::new(max_in_flight) }
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    fn post_once(&self, path: &str, body: &serde_json::Value, timeout: Duration) -> Result<serde_json::Value, ProviderError> {
        let url = format!("{}{}", self.endpoint.base_url, path);
        let mut resp = self
            .agent
            .post(&url)
            .config()
            .timeout_global(Some(timeout))
            .build()
            .send_json(body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        resp.body_mut().read_json().map_err(|e| ProviderError::Malformed(e.to_string()))
    }

    fn call<T: for<'de> Deserialize<'de>>(
        &self,
        key: CacheKey,
        path: &str,
        body: serde_json::Value,
        extract: impl Fn(T) -> Result<f64, ProviderError>,
    ) -> Result<f64, ProviderError> {
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let _permit = self.gate.acquire();
        let deadline = Instant::now() + self.endpoint.budget();
        let mut attempts = 0;
        let mut backoff = BACKOFF_BASE;
        let last = loop {
            attempts += 1;
            let remaining = deadline.saturating_duration_since(Instant::now());
            let err = match self.post_once(path, &body, self.endpoint.timeout.min(remaining)) {
                Ok(raw) => match serde_json::from_value::<T>(raw).map_err(|e| ProviderError::Malformed(e.to_string())) {
                    Ok(parsed) => match extract(parsed) {
                        Ok(v) => {
                            self.cache.lock().unwrap().insert(key, v);
                            return Ok(v);
                        }
                        Err(e) => break e,
                    },
                    Err(e) => break e,
                },
                Err(e) => e,
            };
            log::debug!("{path} attempt {attempts} failed: {err}");
            let remaining = deadline.saturating_duration_since(Instant::now());
            if attempts > self.endpoint.max_retries || remaining <= backoff {
                break err;
            }
            std::thread::sleep(backoff);
            backoff *= 2;
        };
        Err(ProviderError::Unavailable { attempts, last: Box::new(last) })
    }
}

#[derive(Deserialize)]
struct CosineResponse {
    cosine: f64,
}

#[derive(Deserialize)]
struct LogProbResponse {
    logp_conditional: Option<f64>,
    logp_full: Option<f64>,
    logp_context: Option<f64>,
}

/// Client for `POST /cosine`.
pub struct EmbeddingClient(HttpProvider);

impl EmbeddingClient {
    pub fn new(endpoint: ProviderEndpoint) -> Self {
        Self(HttpProvider::new(endpoint))
    }

    pub fn with_max_in_flight(endpoint: ProviderEndpoint, n: usize) -> Self {
        Self(HttpProvider::with_max_in_flight(endpoint, n))
    }

    /// Cosine similarity clipped to `[-1, 1]`.
    pub fn fetch_cosine(&self, a: &str, b: &str) -> Result<f64, ProviderError> {
        self.0.call(
            CacheKey::Cosine(a.into(), b.into()),
            "/cosine",
            json!({ "a": a, "b": b }),
            |r: CosineResponse| {
                if !r.cosine.is_finite() {
                    return Err(ProviderError::Malformed("non-finite cosine".into()));
                }
                if !(-1.0..=1.0).contains(&r.cosine) {
                    log::warn!("cosine {} outside [-1, 1]; clipping", r.cosine);
                }
                Ok(r.cosine.clamp(-1.0, 1.0))
            },
        )
    }
}

impl SemanticProvider for EmbeddingClient {
    fn cosine(&self, a: &str, b: &str) -> Option<f64> {
        self.fetch_cosine(a, b).map_err(|e| log::warn!("embedding provider: {e}")).ok()
    }
}

/// Client for `POST /logprob`.
pub struct LanguageModelClient(HttpProvider);

impl LanguageModelClient {
    pub fn new(endpoint: ProviderEndpoint) -> Self {
        Self(HttpProvider::new(endpoint))
    }

    pub fn with_max_in_flight(endpoint: ProviderEndpoint, n: usize) -> Self {
        Self(HttpProvider::with_max_in_flight(endpoint, n))
    }

    /// `log P(gt | pre, post)`, either as returned or as full minus context.
    pub fn fetch_logprob(&self, pre: &str, gt: &str, post: &str) -> Result<f64, ProviderError> {
        self.0.call(
            CacheKey::LogProb(pre.into(), gt.into(), post.into()),
            "/logprob",
            json!({ "pre": pre, "gt": gt, "post": post }),
            |r: LogProbResponse| {
                let v = match (r.logp_conditional, r.logp_full, r.logp_context) {
                    (Some(c), _, _) => c,
                    (None, Some(full), Some(ctx)) => full - ctx,
                    _ => return Err(ProviderError::Malformed("missing log-probability fields".into())),
                };
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(ProviderError::Malformed("non-finite log-probability".into()))
                }
            },
        )
    }
}

impl ContextProvider for LanguageModelClient {
    fn logp_conditional(&self, pre: &str, gt: &str, post: &str) -> Option<f64> {
        self.fetch_logprob(pre, gt, post).map_err(|e| log::warn!("LM provider: {e}")).ok()
    }
}
