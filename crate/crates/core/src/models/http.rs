//! Blocking client for OpenAI-compatible `chat/completions` endpoints.

use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use base64::Engine as _;
use log::{debug, warn};
use serde_json::{json, Value};

use super::{ChatPrompt, LanguageModel, ModelError, PointQuery, PointingModel, ProviderConfig};

/// Delay before the first retry; doubles on every further attempt.
pub const DEFAULT_BACKOFF_BASE: Duration = Duration::from_secs(1);

// Counting semaphore bounding concurrent requests per client.
struct Permits {
    available: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.freed.notify_one();
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

/// Chat-completions client used for both the language and the pointing
/// model. Shareable across threads; at most `max_in_flight` requests run at
/// once.
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    token: Option<String>,
    max_retries: u32,
    backoff_base: Duration,
    agent: ureq::Agent,
    permits: Permits,
}

impl std::fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatClient")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .field("token", &self.token.as_ref().map(|_| "***"))
            .field("max_retries", &self.max_retries)
            .finish()
    }
}

impl HttpChatClient {
    /// Reads the bearer token from the environment variable named in the
    /// config, if any.
    pub fn from_config(config: &ProviderConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let token = match config.token_env.as_deref() {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ModelError::Config(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_s)))
            .http_status_as_error(false)
            .build();
        Ok(Self {
            endpoint: config.endpoint.clone().unwrap_or_default(),
            model: config.model.clone().unwrap_or_default(),
            token,
            max_retries: config.max_retries,
            backoff_base: DEFAULT_BACKOFF_BASE,
            agent: agent_config.into(),
            permits: Permits::new(config.max_in_flight),
        })
    }

    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    fn attempt(&self, body: &Value) -> Result<String, Failure> {
        let mut request = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.token {
            request = request.header("Authorization", &format!("Bearer {token}"));
        }
        let mut response = request.send_json(body).map_err(|e| match e {
            ureq::Error::Io(_)
            | ureq::Error::Timeout(_)
            | ureq::Error::HostNotFound
            | ureq::Error::ConnectionFailed
            | ureq::Error::Protocol(_) => Failure::Retryable(e.to_string()),
            other => Failure::Fatal(other.to_string()),
        })?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Failure::Retryable(e.to_string()))?;
        debug!("POST {} -> {} body={}", self.endpoint, status, text);
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err(Failure::Retryable(format!("HTTP {status}: {text}"))),
            _ => Err(Failure::Fatal(format!("HTTP {status}: {text}"))),
        }
    }

    /// Sends `messages` and returns the first choice's text. Transport
    /// failures, 429 and 5xx are retried with exponential backoff; malformed
    /// responses are not.
    pub fn chat(&self, messages: Value) -> Result<String, ModelError> {
        let body = json!({
            "model": self.model,
            "messages": messages,
            "temperature": 0,
        });
        debug!(
            "POST {} (Authorization: {}) body={}",
            self.endpoint,
            if self.token.is_some() {
                "Bearer ***"
            } else {
                "none"
            },
            elide_images(&body)
        );
        let _permit = self.permits.acquire();
        let mut attempts = 0;
        let raw = loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(text) => break text,
                Err(Failure::Fatal(message)) => {
                    return Err(ModelError::Provider { message, attempts })
                }
                Err(Failure::Retryable(message)) => {
                    if attempts > self.max_retries {
                        return Err(ModelError::Provider { message, attempts });
                    }
                    let delay = self.backoff_base * 2u32.saturating_pow(attempts - 1);
                    warn!(
                        "request to {} failed ({message}), retrying in {delay:?}",
                        self.endpoint
                    );
                    thread::sleep(delay);
                }
            }
        };
        extract_content(&raw)
    }
}

/// Pulls `choices[0].message.content` out of a chat-completions response.
pub(crate) fn extract_content(raw: &str) -> Result<String, ModelError> {
    let parse_err = |message: &str| ModelError::Parse {
        message: message.to_string(),
        raw: raw.to_string(),
    };
    let value: Value =
        serde_json::from_str(raw).map_err(|e| parse_err(&format!("response is not JSON: {e}")))?;
    let content = value
        .pointer("/choices/0/message/content")
        .ok_or_else(|| parse_err("response has no choices[0].message.content"))?;
    match content {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts
            .iter()
            .filter_map(|p| p.get("text").and_then(Value::as_str))
            .collect::<Vec<_>>()
            .join("")),
        _ => Err(parse_err(
            "message content is neither text nor a list of parts",
        )),
    }
}

// Replaces base64 image payloads so debug logs stay readable.
fn elide_images(body: &Value) -> Value {
    match body {
        Value::String(s) if s.starts_with("data:") && s.len() > 64 => {
            Value::String(format!("<{} bytes of inline image>", s.len()))
        }
        Value::Array(items) => Value::Array(items.iter().map(elide_images).collect()),
        Value::Object(map) => Value::Object(
            map.iter()
                .map(|(k, v)| (k.clone(), elide_images(v)))
                .collect(),
        ),
        other => other.clone(),
    }
}

impl LanguageModel for HttpChatClient {
    fn complete(&self, prompt: &ChatPrompt<'_>) -> Result<String, ModelError> {
        self.chat(json!([
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.user},
        ]))
    }
}

impl PointingModel for HttpChatClient {
    fn point(&self, query: &PointQuery<'_>) -> Result<String, ModelError> {
        let data = base64::engine::general_purpose::STANDARD.encode(query.image.bytes);
        self.chat(json!([{
            "role": "user",
            "content": [
                {"type": "text", "text": query.prompt},
                {"type": "image_url", "image_url": {"url": format!("data:{};base64,{data}", query.image.mime)}},
            ],
        }]))
    }
}
