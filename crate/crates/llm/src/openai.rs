//! HTTP provider for OpenAI-compatible `/chat/completions` endpoints.

use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::{json, Value};

use crate::client::{ChatProvider, ChatRequest, ClientError, Completion, Usage};

pub const ENV_ENDPOINT: &str = "DSM_SEQ_ENDPOINT";
pub const ENV_API_KEY: &str = "DSM_SEQ_API_KEY";
pub const ENV_MODEL: &str = "DSM_SEQ_MODEL";
pub const ENV_RPM: &str = "DSM_SEQ_RPM";

/// API key that never prints.
#[derive(Clone, PartialEq, Eq)]
pub struct Secret(String);

impl Secret {
    pub fn new(value: impl Into<String>) -> Self {
        Secret(value.into())
    }

    pub fn expose(&self) -> &str {
        &self.0
    }

    /// Replace every occurrence of the secret in `text`.
    pub fn redact(&self, text: &str) -> String {
        if self.0.is_empty() {
            text.to_string()
        } else {
            text.replace(&self.0, "[REDACTED]")
        }
    }
}

impl fmt::Debug for Secret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[REDACTED]")
    }
}

#[derive(Clone, Debug)]
pub struct ProviderConfig {
    /// Base URL such as `https://api.example.com/v1`, or the full
    /// `.../chat/completions` URL.
    pub endpoint: String,
    pub api_key: Secret,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub backoff: Duration,
    pub requests_per_minute: Option<u32>,
    /// Log request and response bodies (secret redacted).
    pub audit: bool,
}

impl ProviderConfig {
    pub fn new(endpoint: impl Into<String>, api_key: impl Into<String>, model: impl Into<String>) -> Self {
        ProviderConfig {
            endpoint: endpoint.into(),
            api_key: Secret::new(api_key),
            model: model.into(),
            timeout: Duration::from_secs(120),
            max_retries: 5,
            backoff: Duration::from_millis(500),
            requests_per_minute: None,
            audit: false,
        }
    }

    pub fn from_env() -> Result<Self, ClientError> {
        let var = |name: &str| std::env::var(name).map_err(|_| ClientError::Config(format!("{name} is not set")));
        let mut cfg = ProviderConfig::new(var(ENV_ENDPOINT)?, var(ENV_API_KEY)?, var(ENV_MODEL)?);
        if let Ok(rpm) = std::env::var(ENV_RPM) {
            cfg.requests_per_minute =
                Some(rpm.parse().map_err(|_| ClientError::Config(format!("{ENV_RPM} must be an integer")))?);
        }
        Ok(cfg)
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with("/chat/completions") {
            base.to_string()
        } else {
            format!("{base}/chat/completions")
        }
    }
}

/// Token bucket holding up to `rpm` tokens, refilled continuously.
#[derive(Debug)]
pub struct RateLimiter {
    capacity: f64,
    per_second: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn per_minute(rpm: u32) -> Self {
        let capacity = rpm.max(1) as f64;
        RateLimiter { capacity, per_second: capacity / 60.0, state: Mutex::new((capacity, Instant::now())) }
    }

    /// How long the caller must wait before the next request; consumes a token.
    pub fn reserve(&self) -> Duration {
        let mut state = self.state.lock().unwrap();
        let now = Instant::now();
        let (tokens, last) = *state;
        let refilled = (tokens + now.duration_since(last).as_secs_f64() * self.per_second).min(self.capacity);
        let after = refilled - 1.0;
        *state = (after, now);
        if after >= 0.0 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64(-after / self.per_second)
        }
    }
}

pub struct OpenAiCompatibleProvider {
    config: ProviderConfig,
    http: reqwest::blocking::Client,
    limiter: Option<RateLimiter>,
}

impl fmt::Debug for OpenAiCompatibleProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpenAiCompatibleProvider").field("config", &self.config).finish()
    }
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
}

enum Attempt {
    Done(Completion),
    Retry(ClientError),
    Fail(ClientError),
}

impl OpenAiCompatibleProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ClientError> {
        if config.timeout.is_zero() {
            return Err(ClientError::Config("timeout must be positive".into()));
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let limiter = config.requests_per_minute.map(RateLimiter::per_minute);
        Ok(OpenAiCompatibleProvider { config, http, limiter })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn body(&self, req: &ChatRequest) -> Value {
        let model = if req.model.is_empty() { &self.config.model } else { &req.model };
        let mut body = json!({ "model": model, "messages": req.messages });
        let obj = body.as_object_mut().expect("object literal");
        for (k, v) in &req.params {
            obj.insert(k.clone(), v.clone());
        }
        body
    }

    fn attempt(&self, body: &Value, attempts: u32, retries: u32) -> Attempt {
        if let Some(limiter) = &self.limiter {
            let wait = limiter.reserve();
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        let result = self
            .http
            .post(self.config.url())
            .bearer_auth(self.config.api_key.expose())
            .json(body)
            .send();
        let response = match result {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => {
                let message = self.config.api_key.redact(&e.to_string());
                return Attempt::Retry(ClientError::Transport { attempts, message });
            }
        };
        let status = response.status().as_u16();
        if status == 401 || status == 403 {
            return Attempt::Fail(ClientError::Auth { status });
        }
        if status == 429 || response.status().is_server_error() {
            return Attempt::Retry(ClientError::Status { status, attempts });
        }
        if !response.status().is_success() {
            return Attempt::Fail(ClientError::Status { status, attempts });
        }
        let text = match response.text() {
            Ok(t) => t,
            Err(e) if e.is_timeout() => return Attempt::Retry(ClientError::Timeout { attempts }),
            Err(e) => return Attempt::Retry(ClientError::Transport { attempts, message: e.to_string() }),
        };
        if self.config.audit {
            log::info!("response body: {}", self.config.api_key.redact(&text));
        }
        let wire: WireResponse = match serde_json::from_str(&text) {
            Ok(w) => w,
            Err(e) => return Attempt::Fail(ClientError::Malformed(e.to_string())),
        };
        let Some(content) = wire.choices.into_iter().next().and_then(|c| c.message.content) else {
            return Attempt::Fail(ClientError::Malformed("no choices[0].message.content".into()));
        };
        let usage = Usage {
            retries,
            prompt_tokens: wire.usage.as_ref().and_then(|u| u.prompt_tokens),
            completion_tokens: wire.usage.as_ref().and_then(|u| u.completion_tokens),
        };
        Attempt::Done(Completion { text: content, usage })
    }
}

impl ChatProvider for OpenAiCompatibleProvider {
    /// Retries transport failures, timeouts, HTTP 429 and 5xx with
    /// exponential backoff (`backoff * 2^k`) up to `max_retries` times.
    fn complete(&self, req: &ChatRequest) -> Result<Completion, ClientError> {
        let body = self.body(req);
        if self.config.audit {
            log::info!("request body: {}", self.config.api_key.redact(&body.to_string()));
        }
        let mut retries = 0;
        loop {
            match self.attempt(&body, retries + 1, retries) {
                Attempt::Done(c) => return Ok(c),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if retries >= self.config.max_retries => return Err(e),
                Attempt::Retry(e) => {
                    let delay = self.config.backoff.saturating_mul(1 << retries.min(16));
                    log::warn!("attempt {} failed ({e}); retrying in {delay:?}", retries + 1);
                    std::thread::sleep(delay);
                    retries += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn secrets_do_not_print() {
        let cfg = ProviderConfig::new("http://localhost:1/v1", "sk-very-secret-123", "m");
        let shown = format!("{cfg:?}");
        assert!(!shown.contains("sk-very-secret-123"));
        assert!(shown.contains("[REDACTED]"));
        assert_eq!(cfg.api_key.redact("Bearer sk-very-secret-123"), "Bearer [REDACTED]");
    }

    #[test]
    fn url_building() {
        let mut cfg = ProviderConfig::new("https://x.test/v1/", "k", "m");
        assert_eq!(cfg.url(), "https://x.test/v1/chat/completions");
        cfg.endpoint = "https://x.test/v1/chat/completions".into();
        assert_eq!(cfg.url(), "https://x.test/v1/chat/completions");
    }

    #[test]
    fn zero_timeout_rejected() {
        let mut cfg = ProviderConfig::new("http://x", "k", "m");
        cfg.timeout = Duration::ZERO;
        assert!(matches!(OpenAiCompatibleProvider::new(cfg), Err(ClientError::Config(_))));
    }

    #[test]
    fn params_pass_through_and_defaults_stay_empty() {
        let p = OpenAiCompatibleProvider::new(ProviderConfig::new("http://x", "k", "default-model")).unwrap();
        let req = ChatRequest::single_turn("", "hi");
        let body = p.body(&req);
        assert_eq!(body["model"], "default-model");
        assert_eq!(body.as_object().unwrap().len(), 2);
        let mut req = ChatRequest::single_turn("other", "hi");
        req.params.insert("temperature".into(), json!(0.2));
        let body = p.body(&req);
        assert_eq!(body["model"], "other");
        assert_eq!(body["temperature"], 0.2);
    }

    #[test]
    fn token_bucket_throttles_after_capacity() {
        let limiter = RateLimiter::per_minute(2);
        assert_eq!(limiter.reserve(), Duration::ZERO);
        assert_eq!(limiter.reserve(), Duration::ZERO);
        let wait = limiter.reserve();
        assert!(wait > Duration::from_secs(25) && wait <= Duration::from_secs(30), "{wait:?}");
    }
}
