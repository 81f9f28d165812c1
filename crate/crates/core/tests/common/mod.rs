//! Loopback chat-completions stub for integration tests.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

/// Maps a request body to `(status, assistant content)`.
pub type Handler = dyn Fn(&Value) -> (u16, String) + Send + Sync;

pub struct StubServer {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Value>>>,
    /// `Authorization` header of each request, in arrival order.
    pub auth: Arc<Mutex<Vec<Option<String>>>>,
}

impl StubServer {
    /// Serves until the process exits; each connection gets its own thread.
    pub fn start(handler: Arc<Handler>) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let auth = Arc::new(Mutex::new(Vec::new()));
        let (seen, seen_auth) = (Arc::clone(&requests), Arc::clone(&auth));
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let handler = Arc::clone(&handler);
                let (seen, seen_auth) = (Arc::clone(&seen), Arc::clone(&seen_auth));
                thread::spawn(move || serve(stream, &*handler, &seen, &seen_auth));
            }
        });
        StubServer { base_url, requests, auth }
    }

    pub fn request_count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }
}

fn serve(stream: TcpStream, handler: &Handler, seen: &Mutex<Vec<Value>>, seen_auth: &Mutex<Vec<Option<String>>>) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            } else if k.eq_ignore_ascii_case("authorization") {
                authorization = Some(v.trim().to_string());
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    seen.lock().unwrap().push(request.clone());
    seen_auth.lock().unwrap().push(authorization);
    let (status, content) = handler(&request);
    let payload = if status == 200 {
        json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string()
    } else {
        json!({"error": {"message": content}}).to_string()
    };
    let reason = if status == 200 { "OK" } else { "Error" };
    let mut out = stream;
    let _ = write!(
        out,
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = out.flush();
}

/// Concatenated text parts of every message in a request.
pub fn request_text(request: &Value) -> String {
    let mut out = String::new();
    for m in request["messages"].as_array().into_iter().flatten() {
        match &m["content"] {
            Value::String(s) => out.push_str(s),
            Value::Array(parts) => {
                for p in parts {
                    if let Some(t) = p["text"].as_str() {
                        out.push_str(t);
                    }
                }
            }
            _ => {}
        }
        out.push('\n');
    }
    out
}

/// Number of image parts in a request.
pub fn image_count(request: &Value) -> usize {
    request["messages"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|m| m["content"].as_array())
        .flatten()
        .filter(|p| p["type"] == "image_url")
        .count()
}
