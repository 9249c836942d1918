//! Blocking HTTP JSON clients with bounded parallelism and retries.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use edutree_core::decompose::TokenUsage;
use edutree_core::tree::SchemaError;
use serde_json::{json, Value};

use crate::config::InferenceEndpointConfig;

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("HTTP {status} after {attempts} attempt(s): {body}")]
    Http { status: u16, attempts: u32, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("reply failed schema validation: {}", summarize(&.0.0))]
    Schema(SchemaError),
}

fn summarize(diags: &[edutree_core::tree::Diagnostic]) -> String {
    diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Permits);

impl Permits {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

enum Failure {
    Retryable(BackendError),
    Fatal(BackendError),
}

/// Shared transport: one agent, one credential, one permit pool.
#[derive(Debug, Clone)]
pub(crate) struct Endpoint {
    config: InferenceEndpointConfig,
    agent: ureq::Agent,
    credential: Option<String>,
    permits: Arc<Permits>,
}

impl Endpoint {
    fn new(config: InferenceEndpointConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let credential = config.credential()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        Ok(Self {
            permits: Arc::new(Permits::new(config.max_parallel_requests)),
            config,
            agent,
            credential,
        })
    }

    fn url(&self, path: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), path)
    }

    /// POSTs `body` and returns the parsed JSON reply, retrying transport
    /// failures, timeouts, 429 and 5xx up to `max_retries` times.
    fn post(&self, path: &str, body: &Value) -> Result<Value, BackendError> {
        let _permit = self.permits.acquire();
        let url = self.url(path);
        let payload = body.to_string();
        let attempts = self.config.max_retries + 1;
        let mut attempt = 0;
        loop {
            attempt += 1;
            match self.try_once(&url, &payload, attempt) {
                Ok(v) => return Ok(v),
                Err(Failure::Fatal(e)) => return Err(e),
                Err(Failure::Retryable(e)) if attempt >= attempts => return Err(e),
                Err(Failure::Retryable(_)) => {
                    let shift = (attempt - 1).min(10);
                    thread::sleep(Duration::from_millis(self.config.retry_backoff_ms << shift));
                }
            }
        }
    }

    fn try_once(&self, url: &str, payload: &str, attempt: u32) -> Result<Value, Failure> {
        let mut req = self.agent.post(url).set("Content-Type", "application/json");
        if let Some(token) = &self.credential {
            req = req.set("Authorization", &format!("Bearer {token}"));
        }
        let text = match req.send_string(payload) {
            Ok(resp) => resp.into_string().map_err(|e| Failure::Retryable(io_failure(&e, attempt)))?,
            Err(ureq::Error::Status(status, resp)) => {
                let body = resp.into_string().unwrap_or_default();
                return Err(match status {
                    401 | 403 => Failure::Fatal(BackendError::Auth { status }),
                    429 | 500..=599 => Failure::Retryable(BackendError::Http { status, attempts: attempt, body }),
                    _ => Failure::Fatal(BackendError::Http { status, attempts: attempt, body }),
                });
            }
            Err(ureq::Error::Transport(t)) => return Err(Failure::Retryable(transport_failure(&t, attempt))),
        };
        serde_json::from_str(&text)
            .map_err(|e| Failure::Fatal(BackendError::Protocol(format!("reply is not JSON: {e}"))))
    }
}

fn is_timeout(message: &str) -> bool {
    let m = message.to_ascii_lowercase();
    m.contains("timed out") || m.contains("timeout")
}

fn transport_failure(t: &ureq::Transport, attempts: u32) -> BackendError {
    let message = t.to_string();
    let io_timeout = std::error::Error::source(t)
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(|e| matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
    if io_timeout || is_timeout(&message) {
        BackendError::Timeout { attempts }
    } else {
        BackendError::Transport { attempts, message }
    }
}

fn io_failure(e: &std::io::Error, attempts: u32) -> BackendError {
    if matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) || is_timeout(&e.to_string()) {
        BackendError::Timeout { attempts }
    } else {
        BackendError::Transport { attempts, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub content: String,
    pub usage: TokenUsage,
}

/// Chat-completion client; clone freely, clones share the permit pool.
#[derive(Debug, Clone)]
pub struct ChatClient {
    endpoint: Endpoint,
    pub temperature: f64,
}

impl ChatClient {
    pub fn new(config: InferenceEndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            endpoint: Endpoint::new(config)?,
            temperature: 0.0,
        })
    }

    pub fn config(&self) -> &InferenceEndpointConfig {
        &self.endpoint.config
    }

    pub fn complete(&self, system: Option<&str>, user: &str) -> Result<ChatReply, BackendError> {
        let mut messages = Vec::new();
        if let Some(s) = system {
            messages.push(json!({"role": "system", "content": s}));
        }
        messages.push(json!({"role": "user", "content": user}));
        let body = json!({
            "model": self.endpoint.config.model_id,
            "messages": messages,
            "temperature": self.temperature,
        });
        let reply = self.endpoint.post("chat/completions", &body)?;
        let content = reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::Protocol("reply has no choices[0].message.content".into()))?
            .to_string();
        let count = |key: &str| reply.pointer(&format!("/usage/{key}")).and_then(Value::as_u64).unwrap_or(0);
        Ok(ChatReply {
            content,
            usage: TokenUsage::new(count("prompt_tokens"), count("completion_tokens")),
        })
    }
}

/// Reranker client: one query against a batch of documents.
#[derive(Debug, Clone)]
pub struct RerankClient {
    endpoint: Endpoint,
}

impl RerankClient {
    pub fn new(config: InferenceEndpointConfig) -> Result<Self, BackendError> {
        Ok(Self {
            endpoint: Endpoint::new(config)?,
        })
    }

    pub fn config(&self) -> &InferenceEndpointConfig {
        &self.endpoint.config
    }

    /// Raw scores, one per document, in request order.
    pub fn rerank(&self, query: &str, documents: &[String]) -> Result<Vec<f64>, BackendError> {
        let body = json!({
            "model": self.endpoint.config.model_id,
            "query": query,
            "documents": documents,
        });
        let reply = self.endpoint.post("rerank", &body)?;
        let scores = reply
            .get("scores")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Protocol("reply has no `scores` array".into()))?;
        if scores.len() != documents.len() {
            return Err(BackendError::Protocol(format!(
                "expected {} scores, got {}",
                documents.len(),
                scores.len()
            )));
        }
        scores.iter().map(numeric).collect()
    }
}

fn numeric(v: &Value) -> Result<f64, BackendError> {
    let parsed = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok(),
        _ => None,
    };
    parsed
        .filter(|x| x.is_finite())
        .ok_or_else(|| BackendError::Protocol(format!("non-numeric score {v}")))
}
