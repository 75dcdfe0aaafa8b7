use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, BackendError, CompletionRequest};
use crate::prompts::IMAGE_SLOT;

pub const API_KEY_VAR: &str = "RXNDP_API_KEY";
pub const API_URL_VAR: &str = "RXNDP_API_URL";

#[derive(Clone)]
pub struct HttpConfig {
    /// Full chat-completions URL.
    pub url: String,
    pub model: String,
    api_key: Option<String>,
    pub max_retries: u32,
    pub backoff: Duration,
    pub max_in_flight: usize,
    pub requests_per_second: f64,
    pub timeout: Duration,
}

impl std::fmt::Debug for HttpConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpConfig")
            .field("url", &self.url)
            .field("model", &self.model)
            .field("api_key", &self.api_key.as_ref().map(|_| "<redacted>"))
            .field("max_retries", &self.max_retries)
            .field("max_in_flight", &self.max_in_flight)
            .field("requests_per_second", &self.requests_per_second)
            .finish()
    }
}

impl HttpConfig {
    /// Endpoint without credentials; see [`HttpConfig::from_env`].
    pub fn new(url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            model: model.into(),
            api_key: None,
            max_retries: 3,
            backoff: Duration::from_millis(500),
            max_in_flight: 4,
            requests_per_second: 2.0,
            timeout: Duration::from_secs(120),
        }
    }

    /// URL from `RXNDP_API_URL`, key from `RXNDP_API_KEY`. Credentials are
    /// read from the environment only.
    pub fn from_env(model: impl Into<String>) -> Result<Self, BackendError> {
        let url = std::env::var(API_URL_VAR).map_err(|_| BackendError::Config(format!("{API_URL_VAR} is not set")))?;
        Ok(Self::new(url, model).with_env_key())
    }

    /// Picks up `RXNDP_API_KEY` if set.
    pub fn with_env_key(mut self) -> Self {
        self.api_key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        self
    }

    pub fn has_key(&self) -> bool {
        self.api_key.is_some()
    }
}

/// Counting semaphore.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.free.lock().expect("gate lock");
        while *n == 0 {
            n = self.cv.wait(n).expect("gate lock");
        }
        *n -= 1;
        GateGuard(self)
    }
}

struct GateGuard<'a>(&'a Gate);

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("gate lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Token bucket holding at most one second's worth of requests.
struct Bucket {
    rate: f64,
    state: Mutex<(f64, Instant)>,
}

impl Bucket {
    fn take(&self) {
        if self.rate <= 0.0 || !self.rate.is_finite() {
            return;
        }
        loop {
            let wait = {
                let mut s = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let cap = self.rate.max(1.0);
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(cap);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                (1.0 - s.0) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// OpenAI-compatible chat client with retries, an in-flight cap and a rate
/// limit shared by all threads using this value.
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    gate: Gate,
    bucket: Bucket,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder().timeout_global(Some(config.timeout)).http_status_as_error(false).build().into();
        let rate = config.requests_per_second;
        Self {
            gate: Gate { free: Mutex::new(config.max_in_flight.max(1)), cv: Condvar::new() },
            bucket: Bucket { rate, state: Mutex::new((rate.max(1.0), Instant::now())) },
            agent,
            config,
        }
    }

    fn body(&self, req: &CompletionRequest) -> Value {
        let data = base64::engine::general_purpose::STANDARD.encode(&req.image);
        let url = format!("data:{};base64,{data}", req.media_type);
        let image_part = json!({"type": "image_url", "image_url": {"url": url}});
        let mut parts = Vec::new();
        let mut segments = req.prompt.splitn(2, IMAGE_SLOT);
        let before = segments.next().unwrap_or_default();
        let after = segments.next();
        if !before.trim().is_empty() {
            parts.push(json!({"type": "text", "text": before.trim_end()}));
        }
        parts.push(image_part);
        if let Some(a) = after.filter(|a| !a.trim().is_empty()) {
            parts.push(json!({"type": "text", "text": a.trim()}));
        }
        let mut body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": parts}],
            "max_tokens": req.decode.max_tokens,
        });
        if req.decode.deterministic {
            body["temperature"] = json!(0);
        }
        body
    }

    fn attempt(&self, body: &Value) -> Result<String, BackendError> {
        let mut r = self.agent.post(&self.config.url);
        if let Some(k) = &self.config.api_key {
            r = r.header("Authorization", &format!("Bearer {k}"));
        }
        let mut resp = r.send_json(body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Status { status, body: text.chars().take(500).collect() });
        }
        extract_content(&text)
    }
}

/// `choices[0].message.content`, as a string or a list of text parts.
fn extract_content(text: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(text).map_err(|e| BackendError::BadReply(e.to_string()))?;
    match &v["choices"][0]["message"]["content"] {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => Ok(parts.iter().filter_map(|p| p["text"].as_str()).collect::<Vec<_>>().join("")),
        _ => Err(BackendError::BadReply("no choices[0].message.content".into())),
    }
}

impl Backend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.config.model)
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let body = self.body(request);
        let mut attempt = 0;
        loop {
            let result = {
                let _slot = self.gate.acquire();
                self.bucket.take();
                self.attempt(&body)
            };
            match result {
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    let delay = self.config.backoff * 2u32.saturating_pow(attempt);
                    log::warn!("request failed ({e}); retry {} in {:?}", attempt + 1, delay);
                    thread::sleep(delay);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}
