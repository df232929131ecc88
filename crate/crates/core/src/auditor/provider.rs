//! Chat-completion providers: an OpenAI-compatible HTTP client with retries,
//! and an offline mock that replays canned completions per screen.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;
use url::Url;

/// Environment variable holding the API key when a preset names none.
pub const DEFAULT_API_KEY_ENV: &str = "TALKAUDIT_API_KEY";

const MAX_BACKOFF: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    TransportFailure { attempts: u32, message: String },
    #[error("authentication failed: {0}")]
    AuthFailure(String),
    #[error("provider refused the request: {0}")]
    ProviderRefusal(String),
    #[error("unexpected provider response: {0}")]
    InvalidResponse(String),
    #[error("no canned completion for screen `{screen_id}`")]
    MissingCompletion { screen_id: String },
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub screen_id: &'a str,
    pub prompt: &'a str,
}

/// A blocking chat-completion backend. Implementations are shared across
/// threads auditing different screens.
pub trait CompletionProvider: Send + Sync {
    fn name(&self) -> &str;

    fn model(&self) -> &str;

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError>;
}

fn default_max_retries() -> u32 {
    2
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_backoff_ms() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub provider_name: String,
    pub model_id: String,
    pub endpoint: Url,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    /// Name of the environment variable holding the API key.
    #[serde(default)]
    pub api_key_env: Option<String>,
    /// Delay before the first retry; doubles on each further retry.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), ProviderError> {
        if !(self.temperature.is_finite() && self.temperature >= 0.0) {
            return Err(ProviderError::InvalidConfig(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if !(self.timeout_secs.is_finite() && self.timeout_secs > 0.0) {
            return Err(ProviderError::InvalidConfig(format!(
                "timeout must be positive, got {}",
                self.timeout_secs
            )));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }

    pub fn api_key_env(&self) -> &str {
        self.api_key_env.as_deref().unwrap_or(DEFAULT_API_KEY_ENV)
    }

    fn backoff_for(&self, retry: u32) -> Duration {
        let factor = 1u64.checked_shl(retry).unwrap_or(u64::MAX);
        Duration::from_millis(self.backoff_ms.saturating_mul(factor)).min(MAX_BACKOFF)
    }
}

/// Named provider configurations, read from a TOML file of `[presets.<name>]` tables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderPresets {
    pub presets: BTreeMap<String, ProviderConfig>,
}

impl ProviderPresets {
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../../config/providers.toml")).expect("built-in presets are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, ProviderError> {
        let presets: ProviderPresets =
            toml::from_str(text).map_err(|e| ProviderError::InvalidConfig(e.to_string()))?;
        for config in presets.presets.values() {
            config.validate()?;
        }
        Ok(presets)
    }

    pub fn get(&self, name: &str) -> Option<&ProviderConfig> {
        self.presets.get(name)
    }
}

#[derive(Debug, Clone)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Error)]
#[error("{0}")]
pub struct TransportError(pub String);

/// The wire under [`HttpProvider`]; swapped out in tests for fault injection.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &Url, bearer: &str, body: &Value, timeout: Duration) -> Result<HttpReply, TransportError>;
}

pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .build()
            .map_err(|e| ProviderError::InvalidConfig(e.to_string()))?;
        Ok(ReqwestTransport { client })
    }
}

impl Transport for ReqwestTransport {
    fn post_json(&self, url: &Url, bearer: &str, body: &Value, timeout: Duration) -> Result<HttpReply, TransportError> {
        let response = self
            .client
            .post(url.clone())
            .bearer_auth(bearer)
            .timeout(timeout)
            .json(body)
            .send()
            .map_err(|e| TransportError(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response.text().map_err(|e| TransportError(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpProvider {
    config: ProviderConfig,
    api_key: String,
    transport: Box<dyn Transport>,
}

impl std::fmt::Debug for HttpProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpProvider").field("config", &self.config).finish_non_exhaustive()
    }
}

impl HttpProvider {
    pub fn new(config: ProviderConfig, api_key: String, transport: Box<dyn Transport>) -> Result<Self, ProviderError> {
        config.validate()?;
        Ok(HttpProvider {
            config,
            api_key,
            transport,
        })
    }

    /// Reads the API key from the configured environment variable. Fails with
    /// [`ProviderError::AuthFailure`] before any request when it is unset.
    pub fn from_env(config: ProviderConfig) -> Result<Self, ProviderError> {
        let var = config.api_key_env().to_owned();
        let key = std::env::var(&var)
            .ok()
            .filter(|k| !k.trim().is_empty())
            .ok_or_else(|| ProviderError::AuthFailure(format!("environment variable {var} is not set")))?;
        HttpProvider::new(config, key, Box::new(ReqwestTransport::new()?))
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn request_body(&self, prompt: &str) -> Value {
        json!({
            "model": self.config.model_id,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": prompt}],
        })
    }
}

fn extract_content(body: &str) -> Result<String, ProviderError> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| ProviderError::InvalidResponse(format!("body is not JSON: {e}")))?;
    let choice = value
        .pointer("/choices/0")
        .ok_or_else(|| ProviderError::InvalidResponse("no choices in response".into()))?;
    if let Some(refusal) = choice.pointer("/message/refusal").and_then(Value::as_str) {
        if !refusal.trim().is_empty() {
            return Err(ProviderError::ProviderRefusal(refusal.to_owned()));
        }
    }
    if choice.get("finish_reason").and_then(Value::as_str) == Some("content_filter") {
        return Err(ProviderError::ProviderRefusal("response blocked by content filter".into()));
    }
    choice
        .pointer("/message/content")
        .and_then(Value::as_str)
        .map(str::to_owned)
        .ok_or_else(|| ProviderError::InvalidResponse("choice has no message content".into()))
}

impl CompletionProvider for HttpProvider {
    fn name(&self) -> &str {
        &self.config.provider_name
    }

    fn model(&self) -> &str {
        &self.config.model_id
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        let body = self.request_body(request.prompt);
        let attempts = self.config.max_retries + 1;
        let mut last_error = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.config.backoff_for(attempt - 1));
            }
            match self
                .transport
                .post_json(&self.config.endpoint, &self.api_key, &body, self.config.timeout())
            {
                Err(e) => last_error = e.0,
                Ok(reply) => match reply.status {
                    200..=299 => return extract_content(&reply.body),
                    401 | 403 => {
                        return Err(ProviderError::AuthFailure(format!("HTTP {}: {}", reply.status, reply.body)))
                    }
                    429 | 500..=599 => last_error = format!("HTTP {}: {}", reply.status, reply.body),
                    status => return Err(ProviderError::ProviderRefusal(format!("HTTP {status}: {}", reply.body))),
                },
            }
            log::warn!(
                "{} attempt {}/{} for {} failed: {last_error}",
                self.config.provider_name,
                attempt + 1,
                attempts,
                request.screen_id
            );
        }
        Err(ProviderError::TransportFailure {
            attempts,
            message: last_error,
        })
    }
}

/// Offline provider: returns the canned completion stored for each screen id.
#[derive(Debug, Default)]
pub struct MockProvider {
    completions: HashMap<String, String>,
    calls: AtomicUsize,
}

impl MockProvider {
    pub fn new(completions: HashMap<String, String>) -> Self {
        MockProvider {
            completions,
            calls: AtomicUsize::new(0),
        }
    }

    /// Loads `<screen_id>.txt` files from `dir`.
    pub fn from_dir(dir: &Path) -> io::Result<Self> {
        let mut completions = HashMap::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                completions.insert(stem.to_owned(), fs::read_to_string(&path)?);
            }
        }
        Ok(MockProvider::new(completions))
    }

    pub fn call_count(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl CompletionProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn model(&self) -> &str {
        "canned"
    }

    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ProviderError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.completions
            .get(request.screen_id)
            .cloned()
            .ok_or_else(|| ProviderError::MissingCompletion {
                screen_id: request.screen_id.to_owned(),
            })
    }
}
