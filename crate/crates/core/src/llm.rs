//! Minimal multimodal chat-completions client.
//!
//! Speaks the widely implemented `POST {base_url}/chat/completions` JSON
//! protocol, so switching vendors is a matter of `base_url` and `model`.
//! The credential is only ever read from the environment variable named in
//! [`EndpointConfig::api_key_env`].

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ContentPart {
    Text(String),
    /// PNG-encoded image, sent inline as a base64 data URI.
    Png(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub parts: Vec<ContentPart>,
}

impl ChatMessage {
    pub fn user(parts: Vec<ContentPart>) -> Self {
        ChatMessage {
            role: Role::User,
            parts,
        }
    }

    pub fn user_text(text: impl Into<String>) -> Self {
        Self::user(vec![ContentPart::Text(text.into())])
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            parts: vec![ContentPart::Text(text.into())],
        }
    }

    fn to_json(&self, redact_images: bool) -> Value {
        let content: Vec<Value> = self
            .parts
            .iter()
            .map(|p| match p {
                ContentPart::Text(t) => json!({"type": "text", "text": t}),
                ContentPart::Png(bytes) if redact_images => {
                    json!({"type": "image_url", "image_url": {"url": format!("<png {} bytes>", bytes.len())}})
                }
                ContentPart::Png(bytes) => {
                    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes);
                    json!({"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{b64}")}})
                }
            })
            .collect();
        json!({"role": self.role, "content": content})
    }

    pub fn text(&self) -> String {
        self.parts
            .iter()
            .filter_map(|p| match p {
                ContentPart::Text(t) => Some(t.as_str()),
                ContentPart::Png(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Anything that turns a conversation into the assistant's next reply.
pub trait ChatClient: Send + Sync {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_in_flight: usize,
    pub timeout_s: u64,
    pub temperature: f64,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        EndpointConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            initial_backoff_ms: 500,
            max_in_flight: 4,
            timeout_s: 120,
            temperature: 0.0,
        }
    }
}

/// Counting semaphore bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Gate {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        *self.gate.free.lock().expect("gate lock") += 1;
        self.gate.cv.notify_one();
    }
}

enum Failure {
    Retryable(String),
    Fatal(String),
}

pub struct HttpChatClient {
    cfg: EndpointConfig,
    http: reqwest::blocking::Client,
    api_key: Option<String>,
    gate: Gate,
    transcript: Option<Mutex<BufWriter<File>>>,
    seed: Option<u64>,
}

impl std::fmt::Debug for HttpChatClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpChatClient")
            .field("base_url", &self.cfg.base_url)
            .field("model", &self.cfg.model)
            .finish_non_exhaustive()
    }
}

impl HttpChatClient {
    pub fn new(cfg: EndpointConfig) -> Result<Self> {
        let mut builder = reqwest::blocking::Client::builder().timeout(Duration::from_secs(cfg.timeout_s));
        let url = cfg.base_url.to_ascii_lowercase();
        if ["http://127.0.0.1", "http://localhost", "http://[::1]"].iter().any(|p| url.starts_with(p)) {
            // never route loopback endpoints through a proxy
            builder = builder.no_proxy();
        }
        let http = builder
            .build()
            .map_err(|e| Error::Endpoint(format!("building HTTP client: {e}")))?;
        let api_key = std::env::var(&cfg.api_key_env).ok().filter(|k| !k.is_empty());
        Ok(HttpChatClient {
            gate: Gate::new(cfg.max_in_flight),
            cfg,
            http,
            api_key,
            transcript: None,
            seed: None,
        })
    }

    /// Appends every request/response pair to a JSONL file (images redacted).
    pub fn with_transcript(mut self, path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.transcript = Some(Mutex::new(BufWriter::new(file)));
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'))
    }

    fn body(&self, messages: &[ChatMessage], redact: bool) -> Value {
        let mut body = json!({
            "model": self.cfg.model,
            "messages": messages.iter().map(|m| m.to_json(redact)).collect::<Vec<_>>(),
            "temperature": self.cfg.temperature,
        });
        if let Some(seed) = self.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    fn attempt(&self, body: &Value) -> std::result::Result<String, Failure> {
        let mut req = self.http.post(self.url()).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Failure::Retryable(format!("transport: {e}")))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| Failure::Retryable(format!("reading body: {e}")))?;
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Failure::Retryable(format!("HTTP {status}: {text}")));
        }
        if !status.is_success() {
            return Err(Failure::Fatal(format!("HTTP {status}: {text}")));
        }
        let value: Value =
            serde_json::from_str(&text).map_err(|e| Failure::Fatal(format!("malformed response JSON: {e}")))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_owned)
            .ok_or_else(|| Failure::Fatal("response has no choices[0].message.content".into()))
    }

    fn log(&self, messages: &[ChatMessage], outcome: &std::result::Result<String, String>, attempts: u32) {
        let Some(t) = &self.transcript else { return };
        let record = json!({
            "request": self.body(messages, true),
            "attempts": attempts,
            "reply": outcome.as_ref().ok(),
            "error": outcome.as_ref().err(),
        });
        let mut w = t.lock().expect("transcript lock");
        if writeln!(w, "{record}").and_then(|_| w.flush()).is_err() {
            log::warn!("could not write LLM transcript");
        }
    }
}

impl ChatClient for HttpChatClient {
    /// Retries transport failures, 5xx and 429 up to `max_retries` times
    /// with exponential backoff.
    fn complete(&self, messages: &[ChatMessage]) -> Result<String> {
        let _slot = self.gate.acquire();
        let body = self.body(messages, false);
        let mut attempts = 0;
        let outcome = loop {
            attempts += 1;
            match self.attempt(&body) {
                Ok(reply) => break Ok(reply),
                Err(Failure::Fatal(msg)) => break Err(msg),
                Err(Failure::Retryable(msg)) if attempts > self.cfg.max_retries => break Err(msg),
                Err(Failure::Retryable(msg)) => {
                    let wait = self.cfg.initial_backoff_ms.saturating_mul(1 << (attempts - 1).min(16));
                    log::warn!("LLM request failed ({msg}); retrying in {wait} ms");
                    std::thread::sleep(Duration::from_millis(wait));
                }
            }
        };
        self.log(messages, &outcome, attempts);
        outcome.map_err(|msg| Error::Endpoint(format!("after {attempts} attempt(s): {msg}")))
    }
}

/// Finds the first balanced `{...}` block in `text` that parses as a JSON
/// object. Works for bare JSON as well as JSON inside fenced blocks or prose.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    for (start, _) in text.match_indices('{') {
        let mut depth = 0usize;
        let mut in_str = false;
        let mut escaped = false;
        for (off, &b) in bytes[start..].iter().enumerate() {
            if in_str {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_str = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_str = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &text[start..start + off + 1];
                        if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(candidate) {
                            return Some(v);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_bare_fenced_and_embedded_json() {
        assert_eq!(extract_json_object(r#"{"a":1}"#), Some(json!({"a": 1})));
        let fenced = "Sure!\n```json\n{\"a\": {\"b\": \"}\"}}\n```\nthanks";
        assert_eq!(extract_json_object(fenced), Some(json!({"a": {"b": "}"}})));
        // a broken leading fragment is skipped
        assert_eq!(extract_json_object("{oops} then {\"x\": [1]}"), Some(json!({"x": [1]})));
        assert_eq!(extract_json_object("no json here"), None);
    }

    #[test]
    fn image_parts_become_data_uris() {
        let m = ChatMessage::user(vec![ContentPart::Text("hi".into()), ContentPart::Png(vec![1, 2, 3])]);
        let v = m.to_json(false);
        assert_eq!(v["content"][1]["image_url"]["url"], "data:image/png;base64,AQID");
        assert_eq!(m.to_json(true)["content"][1]["image_url"]["url"], "<png 3 bytes>");
    }

    #[test]
    fn gate_bounds_concurrency() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let gate = Gate::new(2);
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        std::thread::scope(|s| {
            for _ in 0..6 {
                s.spawn(|| {
                    let _g = gate.acquire();
                    let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                    peak.fetch_max(now, Ordering::SeqCst);
                    std::thread::sleep(Duration::from_millis(5));
                    live.fetch_sub(1, Ordering::SeqCst);
                });
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
