//! In-process stand-in for the chat endpoint: a hand-rolled HTTP/1.1 server
//! that routes on a digest of the first text block of the request, so tests
//! can script an exact response per prompt without a network or a model.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Routing key for a scripted response: tests compute it from the prompt they
/// expect the client to render.
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

pub struct MockVlmServer {
    addr: SocketAddr,
}

impl MockVlmServer {
    /// Responses keyed by [`prompt_digest`]; unknown prompts get `fallback`.
    pub fn spawn(routes: HashMap<String, String>, fallback: impl Into<String>) -> Self {
        Self::spawn_with_failures(routes, fallback, 0)
    }

    /// Like [`Self::spawn`], but the first `failures` requests are answered
    /// with a 500 so retry behavior can be exercised.
    pub fn spawn_with_failures(
        routes: HashMap<String, String>,
        fallback: impl Into<String>,
        failures: usize,
    ) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
        let addr = listener.local_addr().expect("mock endpoint address");
        let routes = Arc::new(routes);
        let fallback = Arc::new(fallback.into());
        let remaining_failures = Arc::new(AtomicUsize::new(failures));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let routes = Arc::clone(&routes);
                let fallback = Arc::clone(&fallback);
                let remaining_failures = Arc::clone(&remaining_failures);
                thread::spawn(move || serve(stream, &routes, &fallback, &remaining_failures));
            }
        });
        MockVlmServer { addr }
    }

    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }
}

fn serve(
    mut stream: TcpStream,
    routes: &HashMap<String, String>,
    fallback: &str,
    remaining_failures: &AtomicUsize,
) {
    let Ok(clone) = stream.try_clone() else { return };
    let mut reader = BufReader::new(clone);
    // Clients keep connections alive; handle requests until the peer hangs up.
    loop {
        let Some(body) = read_request(&mut reader) else {
            return;
        };
        if claim_failure(remaining_failures) {
            let _ = stream.write_all(
                b"HTTP/1.1 500 Internal Server Error\r\nContent-Length: 0\r\nConnection: close\r\n\r\n",
            );
            return;
        }
        let content = scripted_response(&body, routes, fallback);
        let payload = json!({
            "choices": [{"message": {"role": "assistant", "content": content}}],
        })
        .to_string();
        let response = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
            payload.len(),
        );
        if stream.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

/// Reads one request off the wire; `None` once the peer closes.
fn read_request(reader: &mut BufReader<TcpStream>) -> Option<Vec<u8>> {
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).ok()? == 0 {
        return None;
    }
    let mut content_length = 0usize;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header).ok()? == 0 {
            return None;
        }
        let header = header.trim();
        if header.is_empty() {
            break;
        }
        if let Some(value) = header
            .to_ascii_lowercase()
            .strip_prefix("content-length:")
        {
            content_length = value.trim().parse().unwrap_or(0);
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body).ok()?;
    Some(body)
}

fn claim_failure(remaining: &AtomicUsize) -> bool {
    loop {
        let n = remaining.load(Ordering::SeqCst);
        if n == 0 {
            return false;
        }
        if remaining
            .compare_exchange(n, n - 1, Ordering::SeqCst, Ordering::SeqCst)
            .is_ok()
        {
            return true;
        }
    }
}

fn scripted_response(body: &[u8], routes: &HashMap<String, String>, fallback: &str) -> String {
    let parsed: Value = serde_json::from_slice(body).unwrap_or(Value::Null);
    let prompt = first_text_block(&parsed).unwrap_or_default();
    routes
        .get(&prompt_digest(&prompt))
        .cloned()
        .unwrap_or_else(|| fallback.to_string())
}

fn first_text_block(body: &Value) -> Option<String> {
    match body.pointer("/messages/0/content")? {
        Value::String(text) => Some(text.clone()),
        Value::Array(blocks) => blocks.iter().find_map(|block| {
            if block.get("type")?.as_str()? != "text" {
                return None;
            }
            block.get("text")?.as_str().map(str::to_string)
        }),
        _ => None,
    }
}
