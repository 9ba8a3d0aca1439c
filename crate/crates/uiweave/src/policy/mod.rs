//! Decision backends: given page states they propose candidate action
//! sequences, verify executed ones, and drive task validation. Three
//! implementations share one trait: a remote VLM client, a deterministic
//! oracle for offline tests, and a replay of recorded responses.

pub mod oracle;
pub mod prompts;
pub mod replay;
pub mod testkit;
pub mod vlm;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{ElementSignature, ElementView};
use crate::dsl::{Action, ActionKind, ActionSequence, DslError, VerificationVerdict};
use crate::env::UIState;

pub use oracle::OraclePolicy;
pub use prompts::{render_prompt, TemplateId};
pub use replay::ReplayPolicy;
pub use vlm::{VlmConfig, VlmPolicy};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("policy backend failure: {0}")]
    BackendFailure(String),
    #[error("backend produced neither proposals nor the completion sentinel")]
    EmptyProposal,
    #[error("prompt template is missing slot {0:?}")]
    MissingSlot(String),
    #[error("unparseable backend response: {0}")]
    Malformed(#[from] DslError),
    #[error("replay policy has no recorded response left")]
    ReplayExhausted,
}

/// What an action did, abstracted away from volatile numeric ids: the kind of
/// event plus the stable signature of the element it hit. Enter payloads are
/// deliberately excluded so free-form typed text never breaks matching;
/// selected options are part of the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionDescriptor {
    pub kind: ActionKind,
    pub signature: ElementSignature,
    pub option: Option<String>,
}

impl ActionDescriptor {
    /// Resolves an action's target id against the elements of the state it
    /// ran in. `None` when the id points nowhere.
    pub fn from_action(action: &Action, elements: &[ElementView]) -> Option<Self> {
        let element = elements.iter().find(|e| e.id == action.target())?;
        let option = match action {
            Action::Select(_, option) => Some(option.clone()),
            _ => None,
        };
        Some(ActionDescriptor {
            kind: action.kind(),
            signature: element.signature.clone(),
            option,
        })
    }

    pub fn describe_sequence(
        sequence: &ActionSequence,
        elements: &[ElementView],
    ) -> Vec<ActionDescriptor> {
        sequence
            .actions
            .iter()
            .filter_map(|a| ActionDescriptor::from_action(a, elements))
            .collect()
    }
}

impl std::fmt::Display for ActionDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match (&self.kind, &self.option) {
            (ActionKind::Select, Some(option)) => {
                write!(f, "select {} -> {option}", self.signature)
            }
            (ActionKind::Enter, _) => write!(f, "enter {}", self.signature),
            _ => write!(f, "click {}", self.signature),
        }
    }
}

/// One executed sequence with the identities of the elements it touched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub sequence: ActionSequence,
    pub descriptors: Vec<ActionDescriptor>,
}

/// Fills the "DOM elements clicked previously" slot.
pub fn history_info(history: &[HistoryEntry]) -> String {
    if history.is_empty() {
        return "(none)".to_string();
    }
    history
        .iter()
        .map(|entry| {
            let described: Vec<String> =
                entry.descriptors.iter().map(|d| d.to_string()).collect();
            let dsl = entry
                .sequence
                .to_dsl()
                .unwrap_or_else(|_| "<unserializable>".to_string());
            format!("- {dsl} ({})", described.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// One step of a validation task: which element to hit, identified by
/// signature so it can be re-resolved on the page under test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStep {
    pub kind: ActionKind,
    pub signature: ElementSignature,
    /// Text to type for `Enter` steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    /// Option label for `Select` steps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
}

/// A validation task. The name chains step labels ("New Entry - Input Entry
/// text - Save"); the judge checks exactly what the name states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub name: String,
    pub description: String,
    pub steps: Vec<TaskStep>,
}

impl Task {
    pub fn text(&self) -> String {
        if self.description.is_empty() {
            self.name.clone()
        } else {
            format!("{}: {}", self.name, self.description)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RequestKind {
    Propose,
    Verify,
    ValidateSelect,
    ValidateProcess,
    ValidateJudge,
}

impl RequestKind {
    pub fn label(&self) -> &'static str {
        match self {
            RequestKind::Propose => "propose",
            RequestKind::Verify => "verify",
            RequestKind::ValidateSelect => "select",
            RequestKind::ValidateProcess => "process",
            RequestKind::ValidateJudge => "judge",
        }
    }
}

/// Everything a policy may look at for one decision. States are
/// chronological: for verification the first entry is the pre-interaction
/// state and the last is the final observation.
#[derive(Debug, Clone)]
pub struct PolicyRequest {
    pub kind: RequestKind,
    pub states: Vec<UIState>,
    pub history: Vec<HistoryEntry>,
    pub tasks: Vec<Task>,
    pub task: Option<Task>,
    pub element_names: Vec<String>,
    /// Root for resolving screenshot references to bytes.
    pub artifact_root: Option<PathBuf>,
}

impl PolicyRequest {
    pub fn new(kind: RequestKind, states: Vec<UIState>) -> Self {
        PolicyRequest {
            kind,
            states,
            history: Vec::new(),
            tasks: Vec::new(),
            task: None,
            element_names: Vec::new(),
            artifact_root: None,
        }
    }

    pub fn current(&self) -> Result<&UIState, PolicyError> {
        self.states
            .last()
            .ok_or_else(|| PolicyError::BackendFailure("request carries no state".into()))
    }

    pub fn initial(&self) -> Result<&UIState, PolicyError> {
        self.states
            .first()
            .ok_or_else(|| PolicyError::BackendFailure("request carries no state".into()))
    }
}

/// Proposal batch for one state. `completed` mirrors the page-complete
/// sentinel: the policy believes nothing is left to try.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposals {
    pub sequences: Vec<ActionSequence>,
    pub completed: bool,
}

impl Proposals {
    /// Interprets a raw backend response. A response with neither sequences
    /// nor the completion sentinel said nothing actionable and is an error.
    pub fn from_response(content: &str) -> Result<Self, PolicyError> {
        let reply = crate::dsl::parse_agent_response(content);
        if reply.sequences.is_empty() && !reply.completed {
            return Err(PolicyError::EmptyProposal);
        }
        Ok(Proposals {
            sequences: reply.sequences,
            completed: reply.completed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub passed: bool,
    pub rationale: String,
}

/// A decision backend. Implementations are safe to call from multiple
/// threads at once; any internal state lives behind its own lock.
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    /// Candidate sequences for the current state (`RequestKind::Propose`).
    fn propose(&self, request: &PolicyRequest) -> Result<Proposals, PolicyError>;

    /// Verdict over an executed sequence (`RequestKind::Verify`).
    fn verify(&self, request: &PolicyRequest) -> Result<VerificationVerdict, PolicyError>;

    /// Stage one of validation: per-task opening sequences with task and
    /// state markers (`RequestKind::ValidateSelect`).
    fn select(&self, request: &PolicyRequest) -> Result<crate::dsl::AgentReply, PolicyError>;

    /// Stage two: the next sequence for an in-flight task
    /// (`RequestKind::ValidateProcess`).
    fn advance(&self, request: &PolicyRequest) -> Result<crate::dsl::AgentReply, PolicyError>;

    /// Stage three: did the task's expected change happen
    /// (`RequestKind::ValidateJudge`).
    fn judge(&self, request: &PolicyRequest) -> Result<JudgeVerdict, PolicyError>;
}
