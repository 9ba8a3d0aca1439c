//! DevTools-style control protocol: JSON command/response/event messages over
//! a WebSocket. Commands carry a client-chosen id; responses echo it; events
//! have no id and are skipped by the request/response pump.

use std::net::TcpStream;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tungstenite::stream::MaybeTlsStream;
use tungstenite::{Message, WebSocket};

use crate::dsl::Action;

pub const NAVIGATE: &str = "Page.navigate";
pub const SET_CONTENT: &str = "Page.setDocumentContent";
pub const EVALUATE: &str = "Runtime.evaluate";
pub const SCREENSHOT: &str = "Page.captureScreenshot";

/// Expression whose evaluation returns the full page markup.
pub const OUTER_HTML_PROBE: &str = "document.documentElement.outerHTML";

#[derive(Serialize)]
struct Command<'a> {
    id: u64,
    method: &'a str,
    params: Value,
}

#[derive(Deserialize)]
struct Incoming {
    id: Option<u64>,
    result: Option<Value>,
    error: Option<WireError>,
}

#[derive(Deserialize)]
struct WireError {
    message: String,
}

pub struct BrowserClient {
    socket: WebSocket<MaybeTlsStream<TcpStream>>,
    next_id: u64,
    timeout: Duration,
}

impl BrowserClient {
    /// Connects to a `ws://` endpoint. The timeout bounds each round-trip,
    /// not the whole session.
    pub fn connect(endpoint: &str, timeout: Duration) -> Result<Self, String> {
        let (socket, _response) =
            tungstenite::connect(endpoint).map_err(|e| format!("connect {endpoint}: {e}"))?;
        let client = BrowserClient {
            socket,
            next_id: 0,
            timeout,
        };
        client.set_read_timeout()?;
        Ok(client)
    }

    fn set_read_timeout(&self) -> Result<(), String> {
        let stream = match self.socket.get_ref() {
            MaybeTlsStream::Plain(stream) => stream,
            _ => return Ok(()),
        };
        stream
            .set_read_timeout(Some(self.timeout))
            .map_err(|e| format!("set timeout: {e}"))
    }

    /// Sends one command and pumps incoming messages until its response
    /// arrives, discarding interleaved events.
    pub fn call(&mut self, method: &str, params: Value) -> Result<Value, String> {
        self.next_id += 1;
        let id = self.next_id;
        let payload = serde_json::to_string(&Command { id, method, params })
            .expect("command serializes");
        self.socket
            .send(Message::Text(payload.into()))
            .map_err(|e| format!("{method}: send failed: {e}"))?;
        loop {
            let message = self.socket.read().map_err(|e| match e {
                tungstenite::Error::Io(io)
                    if io.kind() == std::io::ErrorKind::WouldBlock
                        || io.kind() == std::io::ErrorKind::TimedOut =>
                {
                    format!("{method}: timed out after {:?}", self.timeout)
                }
                other => format!("{method}: read failed: {other}"),
            })?;
            let text = match message {
                Message::Text(text) => text,
                Message::Close(_) => return Err(format!("{method}: connection closed")),
                _ => continue,
            };
            let incoming: Incoming = match serde_json::from_str(&text) {
                Ok(incoming) => incoming,
                Err(_) => continue,
            };
            if incoming.id != Some(id) {
                continue; // event or stale response
            }
            if let Some(error) = incoming.error {
                return Err(format!("{method}: {}", error.message));
            }
            return Ok(incoming.result.unwrap_or(Value::Null));
        }
    }
}

/// Structured form of one dispatched interaction, embedded verbatim as the
/// first statement of the generated script so a protocol peer can recover it
/// without a script engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DispatchSpec {
    pub kind: String,
    pub xpath: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
}

impl DispatchSpec {
    pub fn for_action(xpath: &str, action: &Action) -> Self {
        let (kind, text, option) = match action {
            Action::Click(_) => ("click", None, None),
            Action::Enter(_, text) => ("enter", Some(text.clone()), None),
            Action::Select(_, option) => ("select", None, Some(option.clone())),
        };
        DispatchSpec {
            kind: kind.to_string(),
            xpath: xpath.to_string(),
            text,
            option,
        }
    }

    /// Builds the script a real page would execute: locate the node by XPath
    /// and fire the events for the action kind. Returns "ok" on success.
    pub fn to_script(&self) -> String {
        let spec = serde_json::to_string(self).expect("spec serializes");
        format!(
            concat!(
                "(function () {{\n",
                "  var p = {spec};\n",
                "  var el = document.evaluate(p.xpath, document, null,\n",
                "    XPathResult.FIRST_ORDERED_NODE_TYPE, null).singleNodeValue;\n",
                "  if (!el) return \"missing\";\n",
                "  if (p.kind === \"click\") {{ el.click(); return \"ok\"; }}\n",
                "  if (p.kind === \"enter\") {{\n",
                "    el.focus();\n",
                "    el.value = p.text;\n",
                "    el.dispatchEvent(new Event(\"input\", {{ bubbles: true }}));\n",
                "    el.dispatchEvent(new Event(\"change\", {{ bubbles: true }}));\n",
                "    return \"ok\";\n",
                "  }}\n",
                "  if (p.kind === \"select\") {{\n",
                "    for (var i = 0; i < el.options.length; i++) {{\n",
                "      var o = el.options[i];\n",
                "      if (o.text === p.option || o.value === p.option) {{\n",
                "        el.selectedIndex = i;\n",
                "        el.dispatchEvent(new Event(\"change\", {{ bubbles: true }}));\n",
                "        return \"ok\";\n",
                "      }}\n",
                "    }}\n",
                "    return \"missing option\";\n",
                "  }}\n",
                "  return \"unsupported\";\n",
                "}})()",
            ),
            spec = spec
        )
    }

    /// Recovers the embedded spec from a script built by [`to_script`].
    pub fn from_script(script: &str) -> Option<Self> {
        let line = script.lines().find(|l| l.trim_start().starts_with("var p = "))?;
        let json = line.trim_start().strip_prefix("var p = ")?.trim_end_matches(';');
        serde_json::from_str(json).ok()
    }
}

pub fn navigate_params(url: &str) -> Value {
    json!({ "url": url })
}

pub fn set_content_params(html: &str) -> Value {
    json!({ "html": html })
}

pub fn evaluate_params(expression: &str) -> Value {
    json!({ "expression": expression })
}
