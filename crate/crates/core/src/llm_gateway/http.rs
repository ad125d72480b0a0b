//! OpenAI-style chat-completion provider over HTTP.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Provider, ProviderConfig, ProviderError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransportError {
    Timeout(String),
    Connection(String),
}

pub trait HttpTransport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub temperature: f64,
    pub messages: Vec<ChatMessage>,
}

impl ChatRequest {
    /// The whole prompt as a single user message.
    pub fn single_user(model: &str, temperature: f64, prompt: &str) -> Self {
        Self {
            model: model.to_string(),
            temperature,
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_string(),
            }],
        }
    }
}

/// Pulls `choices[0].message.content` out of a response body.
pub fn extract_text(body: &str) -> Result<String, ProviderError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::Malformed(format!("invalid JSON: {e}")))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| ProviderError::Malformed("no text at choices[0].message.content".into()))
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self {
            agent: ureq::AgentBuilder::new().build(),
        }
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &str,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let mut req = self
            .agent
            .post(url)
            .timeout(timeout)
            .set("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let read = |resp: ureq::Response| {
            let status = resp.status();
            resp.into_string()
                .map(|body| HttpResponse { status, body })
                .map_err(|e| TransportError::Connection(e.to_string()))
        };
        match req.send_string(body) {
            Ok(resp) => read(resp),
            Err(ureq::Error::Status(_, resp)) => read(resp),
            Err(ureq::Error::Transport(t)) => {
                let msg = t.to_string();
                if msg.to_lowercase().contains("timed out") {
                    Err(TransportError::Timeout(msg))
                } else {
                    Err(TransportError::Connection(msg))
                }
            }
        }
    }
}

pub struct HttpProvider<T: HttpTransport = UreqTransport> {
    endpoint: String,
    timeout: Duration,
    api_key: Option<String>,
    transport: T,
}

impl HttpProvider<UreqTransport> {
    /// Reads the API key from the environment variable named in `config`.
    pub fn from_config(config: &ProviderConfig) -> Self {
        Self::with_transport(config, UreqTransport::default())
    }
}

impl<T: HttpTransport> HttpProvider<T> {
    pub fn with_transport(config: &ProviderConfig, transport: T) -> Self {
        let api_key = config
            .api_key_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok())
            .filter(|k| !k.is_empty());
        Self {
            endpoint: config.endpoint.clone(),
            timeout: Duration::from_secs_f64(config.timeout_secs),
            api_key,
            transport,
        }
    }
}

impl<T: HttpTransport> Provider for HttpProvider<T> {
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = serde_json::to_string(&ChatRequest::single_user(
            req.model_id,
            req.temperature,
            &req.prompt.text,
        ))
        .map_err(|e| ProviderError::Fatal(e.to_string()))?;
        let resp = self
            .transport
            .post_json(&self.endpoint, self.api_key.as_deref(), &body, self.timeout)
            .map_err(|e| match e {
                TransportError::Timeout(m) => ProviderError::Transient(format!("timeout: {m}")),
                TransportError::Connection(m) => ProviderError::Fatal(format!("connection: {m}")),
            })?;
        match resp.status {
            200..=299 => extract_text(&resp.body),
            429 | 500..=599 => Err(ProviderError::Transient(format!("HTTP {}", resp.status))),
            s => Err(ProviderError::Fatal(format!("HTTP {s}"))),
        }
    }
}
