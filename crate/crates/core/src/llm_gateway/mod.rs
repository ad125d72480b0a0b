//! Chat-completion access with retries, rate limiting and a persistent
//! response cache, plus an offline mock provider.

mod clock;
mod http;
mod mock;
mod store;

pub use clock::{Clock, RateLimiter, SystemClock, VirtualClock, RATE_WINDOW};
pub use http::{
    extract_text, ChatMessage, ChatRequest, HttpProvider, HttpResponse, HttpTransport, TransportError,
    UreqTransport,
};
pub use mock::{load_script, MockMode, MockProvider};
pub use store::ExchangeStore;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompting::RenderedPrompt;

pub const DEFAULT_ENDPOINT: &str = "https://api.deepseek.com/chat/completions";
pub const DEFAULT_MODEL: &str = "deepseek-chat";
const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub endpoint: String,
    pub model_id: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub requests_per_minute: Option<u32>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub retry_base_delay_ms: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            endpoint: DEFAULT_ENDPOINT.into(),
            model_id: DEFAULT_MODEL.into(),
            temperature: 0.0,
            max_retries: 3,
            timeout_secs: 120.0,
            requests_per_minute: None,
            api_key_env: Some("HISTNER_API_KEY".into()),
            retry_base_delay_ms: 1000,
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidConfig(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(GatewayError::InvalidConfig(format!(
                "timeout_secs must be positive, got {}",
                self.timeout_secs
            )));
        }
        if self.model_id.trim().is_empty() {
            return Err(GatewayError::InvalidConfig("model_id is empty".into()));
        }
        if self.temperature != 0.0 {
            log::warn!("temperature {} differs from the replication setting of 0", self.temperature);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub prompt_fingerprint: String,
    pub run_index: u32,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmExchange {
    pub prompt_fingerprint: String,
    pub run_index: u32,
    pub model_id: String,
    pub raw_response: String,
    pub latency_secs: f64,
    /// RFC 3339 timestamp of when the reply was received.
    pub created_at: String,
    /// Document the exchange was first issued for, kept for auditing.
    #[serde(default)]
    pub dataset_id: String,
    #[serde(default)]
    pub doc_id: String,
}

impl LlmExchange {
    pub fn key(&self) -> CacheKey {
        CacheKey {
            prompt_fingerprint: self.prompt_fingerprint.clone(),
            run_index: self.run_index,
            model_id: self.model_id.clone(),
        }
    }
}

/// Metadata identifying which document a prompt targets.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestMeta {
    pub dataset_id: String,
    pub doc_id: String,
}

impl RequestMeta {
    pub fn new(dataset_id: impl Into<String>, doc_id: impl Into<String>) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            doc_id: doc_id.into(),
        }
    }
}

pub struct CompletionRequest<'a> {
    pub prompt: &'a RenderedPrompt,
    pub run_index: u32,
    pub model_id: &'a str,
    pub temperature: f64,
    pub meta: &'a RequestMeta,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("transient provider failure: {0}")]
    Transient(String),
    #[error("provider failure: {0}")]
    Fatal(String),
    #[error("provider reply carries no text: {0}")]
    Malformed(String),
    #[error("no scripted response for prompt {0}")]
    ScriptMiss(String),
}

pub trait Provider: Send + Sync {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GatewayError {
    #[error("provider unavailable after {attempts} attempt(s): {message}")]
    ProviderUnavailable { attempts: u32, message: String },
    #[error("malformed provider reply: {0}")]
    MalformedProviderReply(String),
    #[error("no scripted response for prompt {0}")]
    ScriptMiss(String),
    #[error("exchange store: {0}")]
    Store(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

/// Thread-safe front end: cache lookup, rate limiting, provider call with
/// bounded retries, store.
pub struct Gateway {
    config: ProviderConfig,
    provider: Box<dyn Provider>,
    store: ExchangeStore,
    limiter: RateLimiter,
    clock: Arc<dyn Clock>,
    provider_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    pub fn new(config: ProviderConfig, provider: Box<dyn Provider>, store: ExchangeStore) -> Self {
        Self::with_clock(config, provider, store, Arc::new(SystemClock::default()))
    }

    pub fn with_clock(
        config: ProviderConfig,
        provider: Box<dyn Provider>,
        store: ExchangeStore,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let limiter = RateLimiter::new(config.requests_per_minute, clock.clone());
        Self {
            config,
            provider,
            store,
            limiter,
            clock,
            provider_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    pub fn store(&self) -> &ExchangeStore {
        &self.store
    }

    /// Number of provider invocations, retries included.
    pub fn provider_calls(&self) -> u64 {
        self.provider_calls.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = Duration::from_millis(self.config.retry_base_delay_ms);
        base.saturating_mul(1u32 << attempt.min(16)).min(MAX_BACKOFF)
    }

    pub fn complete(
        &self,
        prompt: &RenderedPrompt,
        run_index: u32,
        meta: &RequestMeta,
    ) -> Result<LlmExchange, GatewayError> {
        let key = CacheKey {
            prompt_fingerprint: prompt.fingerprint.clone(),
            run_index,
            model_id: self.config.model_id.clone(),
        };
        if let Some(hit) = self.store.get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit);
        }
        let request = CompletionRequest {
            prompt,
            run_index,
            model_id: &self.config.model_id,
            temperature: self.config.temperature,
            meta,
        };
        let mut attempt = 0u32;
        loop {
            self.limiter.acquire();
            let started = self.clock.now();
            self.provider_calls.fetch_add(1, Ordering::Relaxed);
            let outcome = self.provider.complete(&request);
            let latency = self.clock.now().saturating_sub(started);
            match outcome {
                Ok(text) => {
                    let exchange = LlmExchange {
                        prompt_fingerprint: key.prompt_fingerprint.clone(),
                        run_index,
                        model_id: key.model_id.clone(),
                        raw_response: text,
                        latency_secs: latency.as_secs_f64(),
                        created_at: chrono::Utc::now().to_rfc3339(),
                        dataset_id: meta.dataset_id.clone(),
                        doc_id: meta.doc_id.clone(),
                    };
                    return self.store.insert(exchange);
                }
                Err(ProviderError::Transient(msg)) if attempt < self.config.max_retries => {
                    let delay = self.backoff(attempt);
                    log::warn!(
                        "{}/{} run {run_index}: {msg}; retrying in {delay:?}",
                        meta.dataset_id,
                        meta.doc_id
                    );
                    self.clock.sleep(delay);
                    attempt += 1;
                }
                Err(ProviderError::Transient(msg)) | Err(ProviderError::Fatal(msg)) => {
                    return Err(GatewayError::ProviderUnavailable {
                        attempts: attempt + 1,
                        message: msg,
                    })
                }
                Err(ProviderError::Malformed(msg)) => return Err(GatewayError::MalformedProviderReply(msg)),
                Err(ProviderError::ScriptMiss(fp)) => return Err(GatewayError::ScriptMiss(fp)),
            }
        }
    }
}
