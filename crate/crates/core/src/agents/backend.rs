use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend `{backend}` has no fixture for prompt {hash}")]
    FixtureMiss { backend: String, hash: String },
    #[error("rate limited after {attempts} attempt(s); retry after {retry_after:?} s")]
    RateLimited { retry_after: Option<f64>, attempts: u32 },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("credentials: {0}")]
    Credentials(String),
    #[error("fixture file {path}: {message}")]
    Fixture { path: String, message: String },
}

/// Hex SHA-256 of the prompt text; the replay lookup key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub trait LlmBackend {
    fn name(&self) -> &str;
    fn complete(&self, prompt: &str) -> Result<String, BackendError>;
}

/// Recorded prompt -> response pairs for one backend.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Fixture {
    pub backend: String,
    pub captured: String,
    pub responses: BTreeMap<String, String>,
}

impl Fixture {
    pub fn new(backend: impl Into<String>, captured: impl Into<String>) -> Self {
        Fixture {
            backend: backend.into(),
            captured: captured.into(),
            responses: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses.insert(prompt_hash(prompt), response.into());
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let err = |message: String| BackendError::Fixture {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| err(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixture serializes");
        s.push('\n');
        s
    }
}

pub struct ReplayBackend {
    fixture: Fixture,
}

impl ReplayBackend {
    pub fn new(fixture: Fixture) -> Self {
        ReplayBackend { fixture }
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        Fixture::load(path).map(Self::new)
    }
}

impl LlmBackend for ReplayBackend {
    fn name(&self) -> &str {
        &self.fixture.backend
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let hash = prompt_hash(prompt);
        self.fixture
            .responses
            .get(&hash)
            .cloned()
            .ok_or_else(|| BackendError::FixtureMiss {
                backend: self.fixture.backend.clone(),
                hash,
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub name: String,
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the bearer token; no header when `None`.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub timeout: Duration,
}

impl HttpConfig {
    pub fn new(name: impl Into<String>, endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        HttpConfig {
            name: name.into(),
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            temperature: 0.0,
            max_tokens: None,
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
            timeout: Duration::from_secs(120),
        }
    }
}

/// OpenAI-compatible chat-completion client.
pub struct HttpChatBackend {
    cfg: HttpConfig,
    client: reqwest::blocking::Client,
    recorder: Option<Mutex<Fixture>>,
}

impl HttpChatBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(cfg.timeout)
            .build()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(HttpChatBackend {
            cfg,
            client,
            recorder: None,
        })
    }

    /// Keeps every successful (prompt, response) pair for fixture capture.
    pub fn recording(mut self, captured: impl Into<String>) -> Self {
        self.recorder = Some(Mutex::new(Fixture::new(self.cfg.name.clone(), captured)));
        self
    }

    pub fn recorded(&self) -> Option<Fixture> {
        self.recorder.as_ref().map(|r| r.lock().expect("recorder lock").clone())
    }

    fn attempt(&self, prompt: &str) -> Result<String, (BackendError, Option<f64>)> {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.cfg.temperature,
        });
        if let Some(n) = self.cfg.max_tokens {
            body["max_tokens"] = json!(n);
        }
        let mut req = self.client.post(&self.cfg.endpoint).json(&body);
        if let Some(var) = &self.cfg.api_key_env {
            let key = std::env::var(var)
                .map_err(|_| (BackendError::Credentials(format!("environment variable {var} is not set")), None))?;
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| (BackendError::Transport(e.to_string()), None))?;
        let status = resp.status();
        let retry_after = resp
            .headers()
            .get(reqwest::header::RETRY_AFTER)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok());
        let text = resp.text().map_err(|e| (BackendError::Transport(e.to_string()), None))?;
        if status.as_u16() == 429 {
            return Err((
                BackendError::RateLimited {
                    retry_after,
                    attempts: 0,
                },
                retry_after,
            ));
        }
        if !status.is_success() {
            return Err((
                BackendError::Http {
                    status: status.as_u16(),
                    body: text,
                },
                retry_after,
            ));
        }
        extract_message(&text).map_err(|e| (e, None))
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion body.
pub fn extract_message(body: &str) -> Result<String, BackendError> {
    let v: serde_json::Value = serde_json::from_str(body).map_err(|e| BackendError::Malformed(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::Malformed("no choices[0].message.content".into()))
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::RateLimited { .. } | BackendError::Transport(_) => true,
        BackendError::Http { status, .. } => *status >= 500,
        _ => false,
    }
}

impl LlmBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.cfg.name
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let attempts = self.cfg.max_attempts.max(1);
        let mut n = 0;
        loop {
            n += 1;
            match self.attempt(prompt) {
                Ok(text) => {
                    if let Some(r) = &self.recorder {
                        r.lock().expect("recorder lock").insert(prompt, text.clone());
                    }
                    return Ok(text);
                }
                Err((e, retry_after)) if retryable(&e) && n < attempts => {
                    let backoff = self.cfg.base_delay * 2u32.pow(n - 1);
                    let wait = retry_after.map_or(backoff, |s| backoff.max(Duration::from_secs_f64(s.max(0.0))));
                    log::warn!("{}: attempt {n} failed ({e}); retrying in {wait:?}", self.cfg.name);
                    thread::sleep(wait);
                }
                Err((BackendError::RateLimited { retry_after, .. }, _)) => {
                    return Err(BackendError::RateLimited {
                        retry_after,
                        attempts: n,
                    })
                }
                Err((e, _)) => return Err(e),
            }
        }
    }
}
