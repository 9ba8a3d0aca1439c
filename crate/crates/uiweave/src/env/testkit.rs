//! In-process protocol peer for tests: speaks the DevTools-style WebSocket
//! protocol on a loopback port and backs it with the simulator, so the
//! browser client stack can be exercised without a real browser.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use base64::Engine;
use serde_json::{json, Value};
use tungstenite::{Message, WebSocket};

use crate::dom::{annotate, render_text, to_html, AnnotateOptions, DomNode};
use crate::dsl::Action;

use super::protocol::{DispatchSpec, EVALUATE, NAVIGATE, OUTER_HTML_PROBE, SCREENSHOT, SET_CONTENT};
use super::simulator::SimulatorBackend;
use super::{Backend, PageSource};

pub struct MockBrowserServer {
    addr: SocketAddr,
}

impl MockBrowserServer {
    /// Starts a server answering every connection with a fresh simulator
    /// session. `pages` maps navigable URLs to their markup.
    pub fn spawn(pages: Vec<(String, String)>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().expect("local addr");
        let pages: Arc<HashMap<String, String>> = Arc::new(pages.into_iter().collect());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let pages = Arc::clone(&pages);
                thread::spawn(move || serve(stream, &pages));
            }
        });
        MockBrowserServer { addr }
    }

    /// Completes the handshake and then never answers, for timeout tests.
    pub fn spawn_unresponsive() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
        let addr = listener.local_addr().expect("local addr");
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                thread::spawn(move || {
                    let Ok(mut socket) = tungstenite::accept(stream) else {
                        return;
                    };
                    while socket.read().is_ok() {}
                });
            }
        });
        MockBrowserServer { addr }
    }

    pub fn endpoint(&self) -> String {
        format!("ws://{}", self.addr)
    }
}

fn serve(stream: TcpStream, pages: &HashMap<String, String>) {
    let Ok(mut socket) = tungstenite::accept(stream) else {
        return;
    };
    let mut backend = SimulatorBackend::new();
    loop {
        let message = match socket.read() {
            Ok(message) => message,
            Err(_) => return,
        };
        let text = match message {
            Message::Text(text) => text,
            Message::Close(_) => return,
            _ => continue,
        };
        let Ok(command) = serde_json::from_str::<Value>(&text) else {
            continue;
        };
        let Some(id) = command.get("id").and_then(Value::as_u64) else {
            continue;
        };
        let method = command.get("method").and_then(Value::as_str).unwrap_or("");
        let params = command.get("params").cloned().unwrap_or(Value::Null);
        if matches!(method, NAVIGATE | SET_CONTENT) {
            // Real endpoints interleave notifications; clients must skip them.
            let event = json!({ "method": "Page.loadEventFired", "params": {} });
            if send(&mut socket, event).is_err() {
                return;
            }
        }
        let reply = match handle(method, &params, &mut backend, pages) {
            Ok(result) => json!({ "id": id, "result": result }),
            Err(message) => json!({ "id": id, "error": { "message": message } }),
        };
        if send(&mut socket, reply).is_err() {
            return;
        }
    }
}

fn send(socket: &mut WebSocket<TcpStream>, payload: Value) -> tungstenite::Result<()> {
    socket.send(Message::Text(payload.to_string().into()))
}

fn handle(
    method: &str,
    params: &Value,
    backend: &mut SimulatorBackend,
    pages: &HashMap<String, String>,
) -> Result<Value, String> {
    match method {
        SET_CONTENT => {
            let html = params
                .get("html")
                .and_then(Value::as_str)
                .ok_or("setDocumentContent without html")?;
            backend
                .navigate(&PageSource::Inline(html.to_string()))
                .map_err(|e| e.to_string())?;
            Ok(json!({}))
        }
        NAVIGATE => {
            let url = params
                .get("url")
                .and_then(Value::as_str)
                .ok_or("navigate without url")?;
            let html = pages.get(url).ok_or_else(|| format!("unknown url {url}"))?;
            backend
                .navigate(&PageSource::Inline(html.clone()))
                .map_err(|e| e.to_string())?;
            Ok(json!({}))
        }
        EVALUATE => {
            let expression = params
                .get("expression")
                .and_then(Value::as_str)
                .ok_or("evaluate without expression")?;
            evaluate(expression, backend)
        }
        SCREENSHOT => {
            let arena = backend.arena().map_err(|e| e.to_string())?;
            let annotated = annotate(&arena, &AnnotateOptions::default());
            let render = render_text(&annotated);
            let data = base64::engine::general_purpose::STANDARD.encode(render.as_bytes());
            Ok(json!({ "data": data }))
        }
        other => Err(format!("unknown method {other}")),
    }
}

fn evaluate(expression: &str, backend: &mut SimulatorBackend) -> Result<Value, String> {
    if expression == OUTER_HTML_PROBE {
        let arena = backend.arena().map_err(|e| e.to_string())?;
        return Ok(json!({ "value": to_html(&arena) }));
    }
    let Some(spec) = DispatchSpec::from_script(expression) else {
        return Err(format!("unsupported expression {expression:?}"));
    };
    let arena = backend.arena().map_err(|e| e.to_string())?;
    let annotated = annotate(&arena, &AnnotateOptions::default());
    let Some(target) = find_by_xpath(&annotated, &spec.xpath) else {
        return Ok(json!({ "value": "missing" }));
    };
    let action = match spec.kind.as_str() {
        "click" => Action::Click(target.node_id),
        "enter" => Action::Enter(target.node_id, spec.text.unwrap_or_default()),
        "select" => match spec.option {
            Some(option) => Action::Select(target.node_id, option),
            None => return Ok(json!({ "value": "missing option" })),
        },
        _ => return Ok(json!({ "value": "unsupported" })),
    };
    match backend.dispatch(&target, &action) {
        Ok(()) => Ok(json!({ "value": "ok" })),
        Err(e) => Ok(json!({ "value": format!("error: {e}") })),
    }
}

fn find_by_xpath(root: &DomNode, xpath: &str) -> Option<DomNode> {
    let mut found = None;
    root.walk(&mut |node| {
        if found.is_none() && node.xpath == xpath {
            found = Some(node.clone());
        }
    });
    found
}
