//! Remote model client speaking an OpenAI-style chat endpoint. Each decision
//! becomes one user message: the rendered prompt first, then the page
//! screenshots in chronological order. Calls run at temperature zero with
//! bounded retries, and every exchange is written to an audit directory so
//! runs can be inspected and replayed.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use crate::dom::outline;
use crate::dsl::{
    parse_agent_response, parse_judge_response, parse_verification_response, AgentReply,
    VerificationVerdict,
};
use crate::env::UIState;

use super::prompts::{format_task_list, render_prompt, TemplateId};
use super::{
    history_info, JudgeVerdict, Policy, PolicyError, PolicyRequest, Proposals, RequestKind,
};

#[derive(Debug, Clone)]
pub struct VlmConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the API key. The key itself
    /// never appears in config files or saved artifacts.
    pub api_key_env: Option<String>,
    pub temperature: f64,
    /// Extra attempts after a failed call.
    pub max_retries: u32,
    /// Delay before the first retry; doubles with each further attempt.
    pub backoff: Duration,
    /// Where prompt and response transcripts are written; no audit when unset.
    pub audit_dir: Option<PathBuf>,
}

impl VlmConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        VlmConfig {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: None,
            temperature: 0.0,
            max_retries: 2,
            backoff: Duration::from_millis(250),
            audit_dir: None,
        }
    }

    pub fn with_api_key_env(mut self, name: impl Into<String>) -> Self {
        self.api_key_env = Some(name.into());
        self
    }

    pub fn with_audit_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.audit_dir = Some(dir.into());
        self
    }

    pub fn with_retries(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }
}

pub struct VlmPolicy {
    config: VlmConfig,
    calls: AtomicUsize,
}

impl VlmPolicy {
    pub fn new(config: VlmConfig) -> Self {
        VlmPolicy {
            config,
            calls: AtomicUsize::new(0),
        }
    }

    fn prompt_for(&self, request: &PolicyRequest) -> Result<String, PolicyError> {
        let mut context: BTreeMap<&str, String> = BTreeMap::new();
        let template = match request.kind {
            RequestKind::Propose => {
                context.insert("history_info_prompt", history_info(&request.history));
                context.insert("domtree", outline(&request.current()?.dom));
                TemplateId::ActionGen
            }
            RequestKind::Verify => {
                context.insert("interact_element_names", request.element_names.join(", "));
                TemplateId::Verification
            }
            RequestKind::ValidateSelect => {
                let names: Vec<String> =
                    request.tasks.iter().map(|t| t.name.clone()).collect();
                context.insert("tasks", format_task_list(&names));
                context.insert("domtree", outline(&request.current()?.dom));
                TemplateId::ValidateSelect
            }
            RequestKind::ValidateProcess => {
                context.insert("task_text", request_task(request)?.text());
                context.insert("domtree", outline(&request.current()?.dom));
                TemplateId::ValidateProcess
            }
            RequestKind::ValidateJudge => {
                context.insert("task_text", request_task(request)?.text());
                TemplateId::ValidateJudge
            }
        };
        render_prompt(template, &context)
    }

    fn message_content(&self, prompt: &str, request: &PolicyRequest) -> Result<Value, PolicyError> {
        let mut blocks = vec![json!({"type": "text", "text": prompt})];
        for state in &request.states {
            if let Some(block) = attachment(request.artifact_root.as_deref(), state)? {
                blocks.push(block);
            }
        }
        Ok(Value::Array(blocks))
    }

    fn request_body(&self, prompt: &str, request: &PolicyRequest) -> Result<Value, PolicyError> {
        Ok(json!({
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": [{"role": "user", "content": self.message_content(prompt, request)?}],
        }))
    }

    fn api_key(&self) -> Result<Option<String>, PolicyError> {
        match &self.config.api_key_env {
            None => Ok(None),
            Some(name) => std::env::var(name).map(Some).map_err(|_| {
                PolicyError::BackendFailure(format!(
                    "API key environment variable {name} is not set"
                ))
            }),
        }
    }

    fn send(&self, body: &Value, key: Option<&str>) -> Result<String, String> {
        let mut builder = ureq::post(&self.config.endpoint);
        if let Some(key) = key {
            builder = builder.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = builder.send_json(body).map_err(|e| e.to_string())?;
        let parsed: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| format!("unreadable response body: {e}"))?;
        parsed
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| "response carries no message content".to_string())
    }

    /// One audited exchange: render, record, send with retries, record the
    /// answer. Returns the raw response text for the caller to parse.
    fn call(&self, request: &PolicyRequest) -> Result<String, PolicyError> {
        let prompt = self.prompt_for(request)?;
        let key = self.api_key()?;
        let index = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        let stem = format!("call_{index:04}_{}", request.kind.label());
        if let Some(dir) = &self.config.audit_dir {
            fs::create_dir_all(dir).map_err(|e| audit_failure(dir, e))?;
            fs::write(dir.join(format!("{stem}.txt")), &prompt)
                .map_err(|e| audit_failure(dir, e))?;
        }
        let body = self.request_body(&prompt, request)?;
        let mut delay = self.config.backoff;
        let mut failure = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                std::thread::sleep(delay);
                delay = delay.saturating_mul(2);
            }
            match self.send(&body, key.as_deref()) {
                Ok(content) => {
                    if let Some(dir) = &self.config.audit_dir {
                        fs::write(dir.join(format!("{stem}.response.txt")), &content)
                            .map_err(|e| audit_failure(dir, e))?;
                    }
                    return Ok(content);
                }
                Err(e) => failure = e,
            }
        }
        Err(PolicyError::BackendFailure(format!(
            "{} failed after {} attempts: {failure}",
            self.config.endpoint,
            self.config.max_retries + 1,
        )))
    }
}

fn request_task(request: &PolicyRequest) -> Result<&super::Task, PolicyError> {
    request
        .task
        .as_ref()
        .ok_or_else(|| PolicyError::BackendFailure("request carries no task".into()))
}

fn audit_failure(dir: &Path, err: std::io::Error) -> PolicyError {
    PolicyError::BackendFailure(format!("audit dir {}: {err}", dir.display()))
}

/// A state's screenshot as a message block: PNG bytes become a base64 data
/// URL, textual renders are inlined as text. States without a stored file
/// contribute nothing.
fn attachment(root: Option<&Path>, state: &UIState) -> Result<Option<Value>, PolicyError> {
    let Some(file) = state.screenshot.file.as_deref() else {
        return Ok(None);
    };
    let path = match root {
        Some(root) => root.join(file),
        None => PathBuf::from(file),
    };
    let bytes = fs::read(&path).map_err(|e| {
        PolicyError::BackendFailure(format!("screenshot {}: {e}", path.display()))
    })?;
    if path.extension().is_some_and(|ext| ext == "png") {
        Ok(Some(json!({
            "type": "image_url",
            "image_url": {
                "url": format!("data:image/png;base64,{}", BASE64.encode(&bytes)),
            },
        })))
    } else {
        Ok(Some(json!({
            "type": "text",
            "text": String::from_utf8_lossy(&bytes).into_owned(),
        })))
    }
}

impl Policy for VlmPolicy {
    fn name(&self) -> &str {
        "vlm"
    }

    fn propose(&self, request: &PolicyRequest) -> Result<Proposals, PolicyError> {
        Proposals::from_response(&self.call(request)?)
    }

    fn verify(&self, request: &PolicyRequest) -> Result<VerificationVerdict, PolicyError> {
        Ok(parse_verification_response(&self.call(request)?)?)
    }

    fn select(&self, request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        Ok(parse_agent_response(&self.call(request)?))
    }

    fn advance(&self, request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        Ok(parse_agent_response(&self.call(request)?))
    }

    fn judge(&self, request: &PolicyRequest) -> Result<JudgeVerdict, PolicyError> {
        let (passed, rationale) = parse_judge_response(&self.call(request)?)?;
        Ok(JudgeVerdict { passed, rationale })
    }
}
