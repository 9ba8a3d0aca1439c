//! Action grammar and response markers shared by the exploration agent, the
//! transition verifier, and the page validator.
//!
//! Grammar: `action := verb "[" int "]" ( "[" payload "]" )?` with
//! `verb := click | enter | select`, actions separated by top-level commas.
//! Responses carry actions in `\boxed{...}` groups, optionally labeled by a
//! preceding `\task{...}` and followed by a `\state{...}` marker. Verifier
//! replies use `\boxed{Yes|No}` plus `\terminate{Continue|Complete}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel reply meaning a page has no unexplored operations left.
pub const PAGE_COMPLETE: &str = "All operations on this page are completed";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DslError {
    #[error("malformed action {input:?}: {reason}")]
    MalformedAction { input: String, reason: String },
    #[error("response contains no boxed action group and no completion sentinel")]
    NoBoxedContent,
    #[error("response contains no boxed Yes/No verdict")]
    MissingVerdict,
    #[error("response contains no terminate marker")]
    MissingTerminate,
}

fn malformed(input: &str, reason: &str) -> DslError {
    DslError::MalformedAction {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}

/// One user interaction addressed at an annotated element id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Click(u32),
    Enter(u32, String),
    Select(u32, String),
}

/// Action variant without its target or payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Click,
    Enter,
    Select,
}

impl Action {
    pub fn target(&self) -> u32 {
        match self {
            Action::Click(id) | Action::Enter(id, _) | Action::Select(id, _) => *id,
        }
    }

    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click(_) => ActionKind::Click,
            Action::Enter(..) => ActionKind::Enter,
            Action::Select(..) => ActionKind::Select,
        }
    }

    pub fn verb(&self) -> &'static str {
        match self {
            Action::Click(_) => "click",
            Action::Enter(..) => "enter",
            Action::Select(..) => "select",
        }
    }

    pub fn payload(&self) -> Option<&str> {
        match self {
            Action::Click(_) => None,
            Action::Enter(_, p) | Action::Select(_, p) => Some(p),
        }
    }

    /// Canonical `verb[id]` / `verb[id][payload]` form.
    ///
    /// Rejects payloads containing `]`: the grammar has no escape mechanism,
    /// so such text cannot round-trip.
    pub fn to_dsl(&self) -> Result<String, DslError> {
        if let Some(p) = self.payload() {
            if p.is_empty() {
                return Err(malformed(p, "empty payload"));
            }
            if p.contains(']') {
                return Err(malformed(p, "payload contains ']'"));
            }
        }
        Ok(match self {
            Action::Click(id) => format!("click[{id}]"),
            Action::Enter(id, p) => format!("enter[{id}][{p}]"),
            Action::Select(id, p) => format!("select[{id}][{p}]"),
        })
    }
}

/// Marker value used both for task progress (`\state{...}`) and for the
/// verifier's exploration signal (`\terminate{...}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Continuation {
    Continue,
    Complete,
}

impl Continuation {
    fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "continue" => Some(Continuation::Continue),
            "complete" => Some(Continuation::Complete),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Continuation::Continue => "Continue",
            Continuation::Complete => "Complete",
        }
    }
}

impl std::fmt::Display for Continuation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered actions from one boxed group, plus its surrounding markers.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionSequence {
    pub actions: Vec<Action>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_marker: Option<Continuation>,
}

impl ActionSequence {
    pub fn new(actions: Vec<Action>) -> Self {
        ActionSequence {
            actions,
            task_label: None,
            state_marker: None,
        }
    }

    pub fn with_task(mut self, label: impl Into<String>) -> Self {
        self.task_label = Some(label.into());
        self
    }

    pub fn with_state(mut self, marker: Continuation) -> Self {
        self.state_marker = Some(marker);
        self
    }

    /// Comma+space joined action list without markers.
    pub fn to_dsl(&self) -> Result<String, DslError> {
        let parts: Result<Vec<_>, _> = self.actions.iter().map(Action::to_dsl).collect();
        Ok(parts?.join(", "))
    }

    /// Full transcript form: `\task{..}` prefix, `\boxed{..}` group, and
    /// `\state{..}` suffix when the markers are set.
    pub fn to_boxed(&self) -> Result<String, DslError> {
        let mut out = String::new();
        if let Some(label) = &self.task_label {
            if label.contains('{') || label.contains('}') {
                return Err(malformed(label, "task label contains a brace"));
            }
            out.push_str("\\task{");
            out.push_str(label);
            out.push_str("} ");
        }
        out.push_str("\\boxed{");
        out.push_str(&self.to_dsl()?);
        out.push('}');
        if let Some(marker) = self.state_marker {
            out.push_str(" \\state{");
            out.push_str(marker.as_str());
            out.push('}');
        }
        Ok(out)
    }
}

/// Transition verdict parsed from a verifier reply.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationVerdict {
    /// The interaction worked: the page observably changed as claimed.
    pub pass: bool,
    /// Continue means the result exposes new content worth exploring.
    pub terminate: Continuation,
    #[serde(default)]
    pub rationale: String,
}

impl VerificationVerdict {
    pub fn new(pass: bool, terminate: Continuation) -> Self {
        VerificationVerdict {
            pass,
            terminate,
            rationale: String::new(),
        }
    }

    pub fn with_rationale(mut self, rationale: impl Into<String>) -> Self {
        self.rationale = rationale.into();
        self
    }
}

/// Everything recovered from one agent reply. Parsing is total: malformed
/// groups are skipped and recorded in `issues` rather than aborting.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentReply {
    pub sequences: Vec<ActionSequence>,
    /// True when the reply contains the page-complete sentinel.
    pub completed: bool,
    pub issues: Vec<DslError>,
}

/// Parses one `verb[id]` / `verb[id][payload]` token.
pub fn parse_action(token: &str) -> Result<Action, DslError> {
    let trimmed = token.trim();
    if trimmed.is_empty() {
        return Err(malformed(token, "empty token"));
    }
    let (action, rest) = parse_one(trimmed)?;
    if !rest.trim().is_empty() {
        return Err(malformed(token, "trailing text after action"));
    }
    Ok(action)
}

/// Parses a comma-separated action list. Commas inside `[...]` payloads do
/// not split: the scanner consumes payloads whole, so `enter[2][a,b]` stays
/// one action.
pub fn parse_sequence(text: &str) -> Result<Vec<Action>, DslError> {
    let mut actions = Vec::new();
    let mut rest = text.trim();
    if rest.is_empty() {
        return Err(malformed(text, "empty action group"));
    }
    loop {
        let (action, remainder) = parse_one(rest)?;
        actions.push(action);
        rest = remainder.trim_start();
        if rest.is_empty() {
            break;
        }
        rest = rest
            .strip_prefix(',')
            .ok_or_else(|| malformed(remainder, "expected ',' between actions"))?
            .trim_start();
        if rest.is_empty() {
            break;
        }
    }
    Ok(actions)
}

/// Parses a single action off the front of `text`, returning the remainder.
fn parse_one(text: &str) -> Result<(Action, &str), DslError> {
    let open = text.find('[').ok_or_else(|| malformed(text, "missing '['"))?;
    let verb = text[..open].trim();
    let after_open = &text[open + 1..];
    let close = after_open
        .find(']')
        .ok_or_else(|| malformed(text, "missing ']' after element id"))?;
    let id: u32 = after_open[..close]
        .trim()
        .parse()
        .map_err(|_| malformed(text, "element id is not a non-negative integer"))?;
    let mut rest = after_open[close + 1..].trim_start();

    let mut payload = None;
    if let Some(body) = rest.strip_prefix('[') {
        // Payloads cannot contain ']', so the next ']' closes the payload.
        let pclose = body
            .find(']')
            .ok_or_else(|| malformed(text, "missing ']' after payload"))?;
        payload = Some(body[..pclose].to_string());
        rest = &body[pclose + 1..];
    }

    let action = match verb.to_ascii_lowercase().as_str() {
        "click" => {
            if payload.is_some() {
                return Err(malformed(text, "click takes no payload"));
            }
            Action::Click(id)
        }
        "enter" => {
            let p = payload.ok_or_else(|| malformed(text, "enter requires a payload"))?;
            if p.is_empty() {
                return Err(malformed(text, "enter payload is empty"));
            }
            Action::Enter(id, p)
        }
        "select" => {
            let p = payload.ok_or_else(|| malformed(text, "select requires an option label"))?;
            if p.is_empty() {
                return Err(malformed(text, "select option label is empty"));
            }
            Action::Select(id, p)
        }
        other => return Err(malformed(text, &format!("unknown verb {other:?}"))),
    };
    Ok((action, rest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MarkerKind {
    Task,
    Boxed,
    State,
}

#[derive(Debug)]
struct MarkerEvent {
    kind: MarkerKind,
    content_start: usize,
    content_end: usize,
}

/// Finds `name{` occurrences (with or without a leading backslash) whose
/// preceding character is not alphanumeric, returning content spans closed at
/// the first `}`.
fn scan_simple(text: &str, name: &str) -> Vec<(usize, usize)> {
    let pat = format!("{name}{{");
    let mut spans = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find(&pat) {
        let at = from + rel;
        let word_start =
            at == 0 || !text[..at].chars().next_back().is_some_and(|c| c.is_ascii_alphanumeric());
        let body = at + pat.len();
        if !word_start {
            from = body;
            continue;
        }
        match text[body..].find('}') {
            Some(i) => {
                spans.push((body, body + i));
                from = body + i + 1;
            }
            None => {
                spans.push((body, text.len()));
                break;
            }
        }
    }
    spans
}

/// Closes a boxed group at the first `}` whose content parses as an action
/// sequence, so payloads containing braces survive. Falls back to the first
/// `}` (recorded as malformed) when no prefix parses.
fn scan_boxed_actions(text: &str) -> Vec<(MarkerEvent, Result<Vec<Action>, DslError>)> {
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find("boxed{") {
        let at = from + rel;
        let word_start =
            at == 0 || !text[..at].chars().next_back().is_some_and(|c| c.is_ascii_alphanumeric());
        let body = at + "boxed{".len();
        if !word_start {
            from = body;
            continue;
        }
        let mut chosen = None;
        let mut first_close = None;
        for (i, c) in text[body..].char_indices() {
            if c != '}' {
                continue;
            }
            let close = body + i;
            if first_close.is_none() {
                first_close = Some(close);
            }
            if let Ok(actions) = parse_sequence(&text[body..close]) {
                chosen = Some((close, actions));
                break;
            }
        }
        let (close, parsed) = match chosen {
            Some((close, actions)) => (close, Ok(actions)),
            None => {
                let close = first_close.unwrap_or(text.len());
                let content = &text[body..close];
                (close, Err(malformed(content, "unparseable boxed group")))
            }
        };
        out.push((
            MarkerEvent {
                kind: MarkerKind::Boxed,
                content_start: body,
                content_end: close,
            },
            parsed,
        ));
        from = (close + 1).min(text.len());
    }
    out
}

/// Recovers every action sequence from an agent reply, in document order.
///
/// A `\task{...}` group labels the next boxed group; a `\state{...}` group
/// marks the previous one. Stray or unknown markers are ignored. The
/// page-complete sentinel sets `completed`.
pub fn parse_agent_response(response: &str) -> AgentReply {
    let completed = response.contains(PAGE_COMPLETE);
    let mut events: Vec<(MarkerEvent, Option<Result<Vec<Action>, DslError>>)> = Vec::new();
    for (span_start, span_end) in scan_simple(response, "task") {
        events.push((
            MarkerEvent {
                kind: MarkerKind::Task,
                content_start: span_start,
                content_end: span_end,
            },
            None,
        ));
    }
    for (span_start, span_end) in scan_simple(response, "state") {
        events.push((
            MarkerEvent {
                kind: MarkerKind::State,
                content_start: span_start,
                content_end: span_end,
            },
            None,
        ));
    }
    for (event, parsed) in scan_boxed_actions(response) {
        events.push((event, Some(parsed)));
    }
    events.sort_by_key(|(e, _)| e.content_start);

    let mut sequences: Vec<ActionSequence> = Vec::new();
    let mut issues = Vec::new();
    let mut pending_task: Option<String> = None;
    for (event, parsed) in events {
        let content = &response[event.content_start..event.content_end];
        match event.kind {
            MarkerKind::Task => pending_task = Some(content.trim().to_string()),
            MarkerKind::State => {
                if let (Some(marker), Some(last)) =
                    (Continuation::parse(content), sequences.last_mut())
                {
                    if last.state_marker.is_none() {
                        last.state_marker = Some(marker);
                    }
                }
            }
            MarkerKind::Boxed => match parsed.expect("boxed events carry a parse") {
                Ok(actions) => sequences.push(ActionSequence {
                    actions,
                    task_label: pending_task.take(),
                    state_marker: None,
                }),
                Err(e) => issues.push(e),
            },
        }
    }
    if sequences.is_empty() && !completed {
        issues.push(DslError::NoBoxedContent);
    }
    AgentReply {
        sequences,
        completed,
        issues,
    }
}

/// Parses a verifier reply: first `\boxed{Yes|No}` plus the
/// `\terminate{Continue|Complete}` marker; prose after the marker becomes the
/// rationale.
pub fn parse_verification_response(response: &str) -> Result<VerificationVerdict, DslError> {
    let pass = first_yes_no(response)?;
    let term = scan_simple(response, "terminate");
    let (start, end) = *term.first().ok_or(DslError::MissingTerminate)?;
    let terminate =
        Continuation::parse(&response[start..end]).ok_or(DslError::MissingTerminate)?;
    let rationale = response[(end + 1).min(response.len())..].trim().to_string();
    Ok(VerificationVerdict {
        pass,
        terminate,
        rationale,
    })
}

/// Parses a judge reply: first `\boxed{Yes|No}`, with following prose as the
/// rationale.
pub fn parse_judge_response(response: &str) -> Result<(bool, String), DslError> {
    let passed = first_yes_no(response)?;
    let rationale = scan_simple(response, "boxed")
        .first()
        .map(|&(_, end)| response[(end + 1).min(response.len())..].trim().to_string())
        .unwrap_or_default();
    Ok((passed, rationale))
}

fn first_yes_no(response: &str) -> Result<bool, DslError> {
    let boxes = scan_simple(response, "boxed");
    let (start, end) = *boxes.first().ok_or(DslError::MissingVerdict)?;
    match response[start..end].trim().to_ascii_lowercase().as_str() {
        "yes" => Ok(true),
        "no" => Ok(false),
        _ => Err(DslError::MissingVerdict),
    }
}
