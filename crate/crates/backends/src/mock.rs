//! In-process HTTP server replaying scripted replies, for tests and demos.

use std::collections::VecDeque;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use edutree_core::decompose::TokenUsage;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct MockReply {
    pub status: u16,
    pub body: String,
    pub delay: Duration,
}

impl MockReply {
    pub fn json(value: Value) -> Self {
        Self {
            status: 200,
            body: value.to_string(),
            delay: Duration::ZERO,
        }
    }

    /// A chat-completion reply carrying `content` and token counts.
    pub fn chat(content: &str, usage: TokenUsage) -> Self {
        Self::json(json!({
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}}],
            "usage": {
                "prompt_tokens": usage.prompt_tokens,
                "completion_tokens": usage.completion_tokens,
                "total_tokens": usage.total(),
            },
        }))
    }

    pub fn scores(scores: &[f64]) -> Self {
        Self::json(json!({ "scores": scores }))
    }

    pub fn status(status: u16) -> Self {
        Self {
            status,
            body: json!({"error": format!("status {status}")}).to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedRequest {
    pub path: String,
    pub authorization: Option<String>,
    pub body: String,
}

impl RecordedRequest {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or(Value::Null)
    }

    /// Content of the last chat message, if this is a chat request.
    pub fn last_message(&self) -> Option<String> {
        let v = self.json();
        let msgs = v.get("messages")?.as_array()?;
        msgs.last()?.get("content")?.as_str().map(str::to_string)
    }
}

type Handler = dyn Fn(&RecordedRequest) -> MockReply + Send + Sync;

enum Behavior {
    /// Replies in order; the last one repeats once the queue runs dry.
    Script(Mutex<VecDeque<MockReply>>, Mutex<Option<MockReply>>),
    Handler(Box<Handler>),
}

impl Behavior {
    fn reply(&self, req: &RecordedRequest) -> MockReply {
        match self {
            Behavior::Script(queue, last) => {
                let mut last = last.lock().unwrap();
                if let Some(next) = queue.lock().unwrap().pop_front() {
                    *last = Some(next);
                }
                last.clone().unwrap_or_else(|| MockReply::status(500))
            }
            Behavior::Handler(f) => f(req),
        }
    }
}

struct Shared {
    behavior: Behavior,
    requests: Mutex<Vec<RecordedRequest>>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// Serves every request on its own thread so concurrency is observable.
pub struct MockServer {
    server: Arc<tiny_http::Server>,
    shared: Arc<Shared>,
    port: u16,
    acceptor: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn scripted(replies: Vec<MockReply>) -> Self {
        Self::start(Behavior::Script(Mutex::new(replies.into()), Mutex::new(None)))
    }

    pub fn with_handler(f: impl Fn(&RecordedRequest) -> MockReply + Send + Sync + 'static) -> Self {
        Self::start(Behavior::Handler(Box::new(f)))
    }

    fn start(behavior: Behavior) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").expect("bind loopback"));
        let port = server.server_addr().to_ip().expect("tcp listener").port();
        let shared = Arc::new(Shared {
            behavior,
            requests: Mutex::new(Vec::new()),
            in_flight: AtomicUsize::new(0),
            max_in_flight: AtomicUsize::new(0),
        });
        let acceptor = {
            let server = Arc::clone(&server);
            let shared = Arc::clone(&shared);
            thread::spawn(move || {
                for request in server.incoming_requests() {
                    let shared = Arc::clone(&shared);
                    thread::spawn(move || serve(request, &shared));
                }
            })
        };
        Self {
            server,
            shared,
            port,
            acceptor: Some(acceptor),
        }
    }

    pub fn url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.requests.lock().unwrap().clone()
    }

    pub fn request_count(&self) -> usize {
        self.shared.requests.lock().unwrap().len()
    }

    /// Highest number of requests observed in flight at once.
    pub fn max_concurrency(&self) -> usize {
        self.shared.max_in_flight.load(Ordering::SeqCst)
    }
}

fn serve(mut request: tiny_http::Request, shared: &Shared) {
    let now = shared.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    shared.max_in_flight.fetch_max(now, Ordering::SeqCst);

    let mut body = String::new();
    let _ = request.as_reader().read_to_string(&mut body);
    let authorization = request
        .headers()
        .iter()
        .find(|h| h.field.equiv("Authorization"))
        .map(|h| h.value.to_string());
    let recorded = RecordedRequest {
        path: request.url().to_string(),
        authorization,
        body,
    };
    shared.requests.lock().unwrap().push(recorded.clone());
    let reply = shared.behavior.reply(&recorded);
    if !reply.delay.is_zero() {
        thread::sleep(reply.delay);
    }
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").unwrap();
    let response = tiny_http::Response::from_string(reply.body)
        .with_status_code(reply.status)
        .with_header(header);
    shared.in_flight.fetch_sub(1, Ordering::SeqCst);
    // The client may have given up already.
    let _ = request.respond(response);
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}
