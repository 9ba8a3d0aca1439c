//! Task-oriented validation of a generated page. Tasks come from a reference
//! interaction graph; each one runs a three-stage protocol against the page
//! under test: pick an opening sequence, keep acting while the policy says
//! the task is unfinished, then judge whether the expected change happened.
//! Every protocol failure is recorded as a task failure, never skipped.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::interactive_elements;
use crate::dsl::{Action, ActionSequence, Continuation};
use crate::env::{load_simulator, EnvError, PageSource, UIState};
use crate::exec::{map_items, ExecMode};
use crate::explorer::SessionFactory;
use crate::graph::InteractionGraph;
use crate::policy::{
    ActionDescriptor, HistoryEntry, Policy, PolicyRequest, RequestKind, Task, TaskStep,
};

pub const DEFAULT_ROUND_CAP: usize = 5;

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("reference graph has no transitions to derive tasks from")]
    EmptyReference,
    #[error("no tasks to validate")]
    NoTasks,
    #[error(transparent)]
    Environment(#[from] EnvError),
}

/// One validated task with everything needed to audit the verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskResult {
    pub task: Task,
    pub passed: bool,
    /// Sequences executed, stage one included. Never exceeds the round cap.
    pub rounds: usize,
    /// State each executed sequence started from, paired with the sequence.
    pub trace: Vec<(UIState, ActionSequence)>,
    pub judge_rationale: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub page_ref: String,
    pub tasks: Vec<TaskResult>,
    /// Percentage of passed tasks.
    pub pass_rate: f64,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.pass_rate == 100.0
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, body)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let body = fs::read_to_string(path)?;
        serde_json::from_str(&body).map_err(std::io::Error::other)
    }
}

/// One task per usable transition, chained with the transitions leading to
/// it so every task starts from the initial page. Task names spell out the
/// chain ("New Entry - Input Entry text - Save"); the judge later checks
/// exactly what the name states. Transitions that lead back to the initial
/// state are skipped: their effect cannot be judged from a final screenshot.
pub fn derive_tasks(graph: &InteractionGraph) -> Result<Vec<Task>, ValidateError> {
    if graph.transitions().is_empty() {
        return Err(ValidateError::EmptyReference);
    }
    let mut tasks = Vec::new();
    let mut seen: HashSet<Vec<ActionDescriptor>> = HashSet::new();
    for transition in graph.transitions() {
        if !transition.classification.is_usable()
            || transition.to() == graph.root()
            || transition.to() == transition.from
        {
            continue;
        }
        let Some(path) = graph.path_to(&transition.from) else {
            continue;
        };
        let chain = path.into_iter().chain([transition]);
        let mut steps = Vec::new();
        let mut parts = Vec::new();
        let mut identity = Vec::new();
        let mut resolved = true;
        for link in chain {
            let Some(from_state) = graph.state(&link.from) else {
                resolved = false;
                break;
            };
            let elements = interactive_elements(&from_state.dom);
            for action in &link.sequence.actions {
                let Some(descriptor) = ActionDescriptor::from_action(action, &elements) else {
                    resolved = false;
                    break;
                };
                let (payload, part) = match action {
                    Action::Click(_) => (None, click_part(&descriptor)),
                    Action::Enter(_, text) => (
                        Some(text.clone()),
                        format!("Input {}", descriptor.signature.label),
                    ),
                    Action::Select(_, option) => (None, format!("Select {option}")),
                };
                parts.push(part);
                steps.push(TaskStep {
                    kind: descriptor.kind,
                    signature: descriptor.signature.clone(),
                    payload,
                    option: descriptor.option.clone(),
                });
                identity.push(descriptor);
            }
            if !resolved {
                break;
            }
        }
        if !resolved || steps.is_empty() || !seen.insert(identity) {
            continue;
        }
        tasks.push(Task {
            name: parts.join(" - "),
            description: String::new(),
            steps,
        });
    }
    Ok(tasks)
}

fn click_part(descriptor: &ActionDescriptor) -> String {
    if descriptor.signature.label.is_empty() {
        descriptor.signature.tag.clone()
    } else {
        descriptor.signature.label.clone()
    }
}

/// Runs one task through the three-stage protocol, with the same policy
/// acting and judging.
pub fn run_task(
    factory: &dyn SessionFactory,
    task: &Task,
    policy: &dyn Policy,
    round_cap: usize,
) -> Result<TaskResult, ValidateError> {
    run_task_judged(factory, task, policy, policy, round_cap)
}

/// Three-stage protocol with separate actor and judge, so a deterministic
/// judge can score what a model-driven actor did.
pub fn run_task_judged(
    factory: &dyn SessionFactory,
    task: &Task,
    actor: &dyn Policy,
    judge: &dyn Policy,
    round_cap: usize,
) -> Result<TaskResult, ValidateError> {
    let mut session = factory.open()?;
    let mut states = vec![session.current().clone()];
    let mut trace: Vec<(UIState, ActionSequence)> = Vec::new();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut rounds = 0usize;

    let fail = |rounds: usize, trace: Vec<(UIState, ActionSequence)>, reason: String| {
        Ok(TaskResult {
            task: task.clone(),
            passed: false,
            rounds,
            trace,
            judge_rationale: reason,
        })
    };

    // Stage one: opening sequence for the task on the initial page.
    let mut select_request =
        PolicyRequest::new(RequestKind::ValidateSelect, states.clone());
    select_request.tasks = vec![task.clone()];
    let reply = match actor.select(&select_request) {
        Ok(reply) => reply,
        Err(error) => return fail(rounds, trace, format!("task selection failed: {error}")),
    };
    let mut next = reply
        .sequences
        .iter()
        .find(|s| s.task_label.as_deref() == Some(task.name.as_str()))
        .or_else(|| reply.sequences.first())
        .cloned();

    loop {
        let Some(sequence) = next.take() else {
            return fail(rounds, trace, "no sequence for the task".into());
        };
        if rounds >= round_cap {
            return fail(rounds, trace, "round cap".into());
        }
        let marker = sequence.state_marker.unwrap_or(Continuation::Complete);
        let before = session.current().clone();
        let elements = interactive_elements(&before.dom);
        let descriptors = ActionDescriptor::describe_sequence(&sequence, &elements);
        match session.run_sequence(&sequence) {
            Ok(new_states) => states.extend(new_states),
            Err(failure) => {
                trace.push((before, sequence));
                return fail(rounds + 1, trace, format!("execution failed: {failure}"));
            }
        }
        trace.push((before, sequence.clone()));
        history.push(HistoryEntry {
            sequence,
            descriptors,
        });
        rounds += 1;
        if marker == Continuation::Complete {
            break;
        }

        // Stage two: the policy continues the task on the updated page.
        let mut process_request =
            PolicyRequest::new(RequestKind::ValidateProcess, states.clone());
        process_request.task = Some(task.clone());
        process_request.history = history.clone();
        let reply = match actor.advance(&process_request) {
            Ok(reply) => reply,
            Err(error) => {
                return fail(rounds, trace, format!("task continuation failed: {error}"))
            }
        };
        next = reply.sequences.first().cloned();
    }

    // Stage three: judge the chronological states of this task branch only.
    let mut judge_request = PolicyRequest::new(RequestKind::ValidateJudge, states);
    judge_request.task = Some(task.clone());
    let verdict = match judge.judge(&judge_request) {
        Ok(verdict) => verdict,
        Err(error) => return fail(rounds, trace, format!("judging failed: {error}")),
    };
    Ok(TaskResult {
        task: task.clone(),
        passed: verdict.passed,
        rounds,
        trace,
        judge_rationale: verdict.rationale,
    })
}

/// Validates every task against the page and aggregates the pass rate.
pub fn validate(
    factory: &dyn SessionFactory,
    page_ref: &str,
    tasks: &[Task],
    actor: &dyn Policy,
    judge: &dyn Policy,
    round_cap: usize,
    mode: ExecMode,
) -> Result<ValidationReport, ValidateError> {
    if tasks.is_empty() {
        return Err(ValidateError::NoTasks);
    }
    let results = map_items(mode, tasks.to_vec(), |task| {
        run_task_judged(factory, &task, actor, judge, round_cap)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let passes = results.iter().filter(|r| r.passed).count();
    let pass_rate = 100.0 * passes as f64 / results.len() as f64;
    Ok(ValidationReport {
        page_ref: page_ref.to_string(),
        tasks: results,
        pass_rate,
    })
}

/// Simulator-backed validation of an offline page.
pub fn validate_simulator(
    source: &PageSource,
    tasks: &[Task],
    policy: &dyn Policy,
    round_cap: usize,
) -> Result<ValidationReport, ValidateError> {
    let page = source.clone();
    let factory = move || load_simulator(page.clone());
    validate(
        &factory,
        &source.describe(),
        tasks,
        policy,
        policy,
        round_cap,
        ExecMode::default(),
    )
}
