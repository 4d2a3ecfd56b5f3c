//! Template-driven JSON-over-HTTP client shared by the remote translation
//! backend and the remote transliteration engine.
//!
//! The request is described by a URL template and a body template; the
//! placeholders `{text}`, `{src}`, `{tgt}` and `{api_key}` are substituted
//! (percent-encoded in the URL, JSON-string-escaped in the body and used
//! verbatim in header values). The result is read from the response JSON at
//! a dotted path such as `translations.0.text`.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::translation::TranslateError;

fn default_method() -> String {
    "POST".into()
}
fn default_retries() -> u32 {
    4
}
fn default_backoff_initial() -> u64 {
    500
}
fn default_backoff_max() -> u64 {
    30_000
}
fn default_timeout() -> u64 {
    30_000
}
fn default_burst() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpEndpointConfig {
    pub url: String,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default)]
    pub headers: BTreeMap<String, String>,
    /// Empty for requests without a body.
    #[serde(default)]
    pub body_template: String,
    pub response_path: String,
    /// Environment variable holding the API key substituted for `{api_key}`.
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_initial")]
    pub backoff_initial_ms: u64,
    #[serde(default = "default_backoff_max")]
    pub backoff_max_ms: u64,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    /// Sustained request rate; unlimited when absent.
    #[serde(default)]
    pub requests_per_second: Option<f64>,
    #[serde(default = "default_burst")]
    pub burst: u32,
}

impl HttpEndpointConfig {
    pub fn new(url: impl Into<String>, body_template: impl Into<String>, response_path: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            method: default_method(),
            headers: BTreeMap::new(),
            body_template: body_template.into(),
            response_path: response_path.into(),
            api_key_env: None,
            max_retries: default_retries(),
            backoff_initial_ms: default_backoff_initial(),
            backoff_max_ms: default_backoff_max(),
            timeout_ms: default_timeout(),
            requests_per_second: None,
            burst: default_burst(),
        }
    }
}

/// Classic token bucket: `capacity` tokens, refilled at `rate` per second.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate: f64, capacity: u32) -> Self {
        let capacity = f64::from(capacity.max(1));
        Self { rate, capacity, state: Mutex::new((capacity, Instant::now())) }
    }

    /// Block until a token is available, then take it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("token bucket poisoned");
                let now = Instant::now();
                let refill = now.duration_since(state.1).as_secs_f64() * self.rate;
                state.0 = (state.0 + refill).min(self.capacity);
                state.1 = now;
                if state.0 >= 1.0 {
                    state.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.0) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

pub struct HttpTemplateClient {
    config: HttpEndpointConfig,
    api_key: String,
    agent: ureq::Agent,
    bucket: Option<TokenBucket>,
}

impl std::fmt::Debug for HttpTemplateClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTemplateClient").field("url", &self.config.url).finish_non_exhaustive()
    }
}

fn json_escape(s: &str) -> String {
    let quoted = serde_json::to_string(s).expect("strings always serialize");
    quoted[1..quoted.len() - 1].to_owned()
}

fn url_escape(s: &str) -> String {
    form_urlencoded::byte_serialize(s.as_bytes()).collect::<String>().replace('+', "%20")
}

fn substitute(template: &str, vars: &[(&str, &str)], escape: impl Fn(&str) -> String) -> String {
    let mut out = template.to_owned();
    for (name, value) in vars {
        let placeholder = format!("{{{name}}}");
        if out.contains(&placeholder) {
            out = out.replace(&placeholder, &escape(value));
        }
    }
    out
}

/// Follow a dotted path (`a.b.0.c`) into a JSON value.
pub fn json_path<'a>(value: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').filter(|p| !p.is_empty()).try_fold(value, |v, part| match v {
        Value::Array(items) => items.get(part.parse::<usize>().ok()?),
        Value::Object(map) => map.get(part),
        _ => None,
    })
}

fn parse_retry_after(value: Option<&str>) -> Option<Duration> {
    value?.trim().parse::<u64>().ok().map(Duration::from_secs)
}

impl HttpTemplateClient {
    pub fn new(config: HttpEndpointConfig) -> Result<Self, TranslateError> {
        let api_key = match &config.api_key_env {
            Some(var) => std::env::var(var)
                .map_err(|_| TranslateError::Backend(format!("environment variable {var} is not set")))?,
            None => String::new(),
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let bucket = config.requests_per_second.filter(|r| *r > 0.0).map(|r| TokenBucket::new(r, config.burst));
        Ok(Self { config, api_key, agent, bucket })
    }

    pub fn config(&self) -> &HttpEndpointConfig {
        &self.config
    }

    /// Issue the request with retries: transport failures, 429 and 5xx are
    /// retried with exponential backoff (honouring `Retry-After`); other
    /// statuses fail immediately.
    pub fn call(&self, vars: &[(&str, &str)]) -> Result<String, TranslateError> {
        let mut all_vars = vars.to_vec();
        all_vars.push(("api_key", self.api_key.as_str()));
        let url = substitute(&self.config.url, &all_vars, url_escape);
        let body = substitute(&self.config.body_template, &all_vars, json_escape);
        let headers: Vec<(String, String)> =
            self.config.headers.iter().map(|(k, v)| (k.clone(), substitute(v, &all_vars, str::to_owned))).collect();

        let mut attempt = 0;
        loop {
            if let Some(bucket) = &self.bucket {
                bucket.acquire();
            }
            let err = match self.send_once(&url, &body, &headers) {
                Ok(text) => return Ok(text),
                Err(e) => e,
            };
            if !err.is_retryable() || attempt >= self.config.max_retries {
                return Err(err);
            }
            let backoff = Duration::from_millis(
                self.config.backoff_initial_ms.saturating_mul(1u64 << attempt.min(20)).min(self.config.backoff_max_ms),
            );
            let wait = match &err {
                TranslateError::RateLimited { retry_after: Some(after) } => backoff.max(*after),
                _ => backoff,
            };
            log::debug!("{} failed ({err}); retry {} in {wait:?}", self.config.url, attempt + 1);
            std::thread::sleep(wait);
            attempt += 1;
        }
    }

    fn send_once(&self, url: &str, body: &str, headers: &[(String, String)]) -> Result<String, TranslateError> {
        let result = if self.config.method.eq_ignore_ascii_case("GET") {
            let mut req = self.agent.get(url);
            for (k, v) in headers {
                req = req.header(k.as_str(), v.as_str());
            }
            req.call()
        } else {
            let mut req = self.agent.post(url);
            for (k, v) in headers {
                req = req.header(k.as_str(), v.as_str());
            }
            if !headers.iter().any(|(k, _)| k.eq_ignore_ascii_case("content-type")) {
                req = req.header("Content-Type", "application/json");
            }
            req.send(body)
        };
        let mut response = result.map_err(|e| TranslateError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let retry_after = parse_retry_after(response.headers().get("retry-after").and_then(|v| v.to_str().ok()));
        let text = response.body_mut().read_to_string().map_err(|e| TranslateError::Transport(e.to_string()))?;
        match status {
            200..=299 => {}
            429 => return Err(TranslateError::RateLimited { retry_after }),
            _ => return Err(TranslateError::Status { status, body: text }),
        }
        let json: Value = serde_json::from_str(&text)
            .map_err(|e| TranslateError::BadResponse(format!("response is not JSON: {e}")))?;
        match json_path(&json, &self.config.response_path) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(other) => {
                Err(TranslateError::BadResponse(format!("{} is not a string: {other}", self.config.response_path)))
            }
            None => Err(TranslateError::BadResponse(format!("no value at {} in {text}", self.config.response_path))),
        }
    }
}
