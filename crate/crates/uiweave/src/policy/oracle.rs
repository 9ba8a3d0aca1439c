//! Deterministic policy for offline runs: proposals read the annotated DOM
//! directly, verdicts compare state keys and element signatures, and task
//! stages resolve manifest steps against the live page. No model, no network.

use std::collections::HashSet;

use indexmap::IndexMap;

use crate::dom::{interactive_elements, outline, DomNode, ElementSignature, ElementView};
use crate::dsl::{
    Action, ActionKind, ActionSequence, AgentReply, Continuation, VerificationVerdict,
};

use super::{
    ActionDescriptor, JudgeVerdict, Policy, PolicyError, PolicyRequest, Proposals, TaskStep,
};

#[derive(Debug, Default)]
pub struct OraclePolicy;

impl OraclePolicy {
    pub fn new() -> Self {
        OraclePolicy
    }
}

/// Deterministic stand-in for the "reasonable query" a model would type.
pub fn synth_text(label: &str) -> String {
    let label = label.trim();
    if label.is_empty() {
        "sample text".to_string()
    } else {
        format!("sample {}", label.to_lowercase())
    }
}

fn first_unselected_option(dom: &DomNode, id: u32) -> Option<String> {
    let node = dom.interactive_node(id)?;
    node.children
        .iter()
        .filter(|c| c.tag == "option")
        .find(|c| c.attr("selected").is_none())
        .map(|c| c.subtree_text())
        .filter(|label| !label.is_empty())
}

/// Longest executable prefix of a task's remaining steps on this page.
/// Returns the concrete actions plus how many steps they consume.
fn resolve_prefix(
    steps: &[TaskStep],
    elements: &[ElementView],
    dom: &DomNode,
) -> (Vec<Action>, usize) {
    let mut actions = Vec::new();
    for step in steps {
        let Some(element) = elements.iter().find(|e| e.signature == step.signature) else {
            break;
        };
        let action = match step.kind {
            ActionKind::Click => Action::Click(element.id),
            ActionKind::Enter => Action::Enter(
                element.id,
                step.payload
                    .clone()
                    .unwrap_or_else(|| synth_text(&element.label)),
            ),
            ActionKind::Select => {
                let Some(option) = step.option.clone().or_else(|| {
                    first_unselected_option(dom, element.id)
                }) else {
                    break;
                };
                Action::Select(element.id, option)
            }
        };
        actions.push(action);
    }
    let consumed = actions.len();
    (actions, consumed)
}

fn signatures(state_dom: &DomNode) -> HashSet<ElementSignature> {
    interactive_elements(state_dom)
        .into_iter()
        .map(|e| e.signature)
        .collect()
}

/// Outline with typed text removed, so a judge verdict cannot be satisfied by
/// residue in form fields alone.
fn masked_outline(dom: &DomNode) -> String {
    fn mask(node: &mut DomNode) {
        if matches!(node.tag.as_str(), "input" | "textarea") {
            node.attributes.shift_remove("value");
        }
        for child in &mut node.children {
            mask(child);
        }
    }
    let mut clone = dom.clone();
    mask(&mut clone);
    outline(&clone)
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "oracle"
    }

    fn propose(&self, request: &PolicyRequest) -> Result<Proposals, PolicyError> {
        let current = request.current()?;
        let elements = interactive_elements(&current.dom);
        let executed: HashSet<Vec<ActionDescriptor>> = request
            .history
            .iter()
            .map(|entry| entry.descriptors.clone())
            .collect();

        let mut by_scope: IndexMap<&str, Vec<&ElementView>> = IndexMap::new();
        for element in &elements {
            by_scope
                .entry(element.signature.scope.as_str())
                .or_default()
                .push(element);
        }

        // A labeled container holding both text fields and a button is a form:
        // fill every field, then press the first button. The fields and that
        // button are spoken for; sibling buttons (Cancel and friends) stay
        // individual candidates.
        let mut candidates: Vec<(u32, Vec<Action>)> = Vec::new();
        let mut in_form: HashSet<u32> = HashSet::new();
        for group in by_scope.values() {
            let inputs: Vec<&ElementView> = group
                .iter()
                .copied()
                .filter(|e| matches!(e.tag.as_str(), "input" | "textarea"))
                .collect();
            let Some(submit) = group.iter().copied().find(|e| e.tag == "button") else {
                continue;
            };
            if inputs.is_empty() {
                continue;
            }
            let mut actions: Vec<Action> = inputs
                .iter()
                .map(|input| Action::Enter(input.id, synth_text(&input.label)))
                .collect();
            actions.push(Action::Click(submit.id));
            for input in &inputs {
                in_form.insert(input.id);
            }
            in_form.insert(submit.id);
            let key = actions.iter().map(Action::target).min().unwrap_or(submit.id);
            candidates.push((key, actions));
        }

        for element in &elements {
            if in_form.contains(&element.id) {
                continue;
            }
            let actions = match element.tag.as_str() {
                "input" | "textarea" => {
                    vec![Action::Enter(element.id, synth_text(&element.label))]
                }
                "select" => match first_unselected_option(&current.dom, element.id) {
                    Some(option) => vec![Action::Select(element.id, option)],
                    None => continue,
                },
                _ => vec![Action::Click(element.id)],
            };
            candidates.push((element.id, actions));
        }

        candidates.sort_by_key(|(key, _)| *key);

        let mut seen: HashSet<Vec<ActionDescriptor>> = HashSet::new();
        let mut sequences = Vec::new();
        for (_, actions) in candidates {
            let sequence = ActionSequence::new(actions);
            let descriptors = ActionDescriptor::describe_sequence(&sequence, &elements);
            if descriptors.len() != sequence.actions.len() {
                continue;
            }
            if executed.contains(&descriptors) || !seen.insert(descriptors) {
                continue;
            }
            sequences.push(sequence);
        }
        let completed = sequences.is_empty();
        Ok(Proposals {
            sequences,
            completed,
        })
    }

    fn verify(&self, request: &PolicyRequest) -> Result<VerificationVerdict, PolicyError> {
        if request.states.len() < 2 {
            return Err(PolicyError::BackendFailure(
                "verification needs the starting and final states".into(),
            ));
        }
        let initial = request.initial()?;
        let last = request.current()?;
        let pass = last.state_key != initial.state_key;
        let before = signatures(&initial.dom);
        let novel: Vec<String> = interactive_elements(&last.dom)
            .into_iter()
            .filter(|e| !before.contains(&e.signature))
            .map(|e| e.signature.to_string())
            .collect();
        let terminate = if pass && !novel.is_empty() {
            Continuation::Continue
        } else {
            Continuation::Complete
        };
        let rationale = if !pass {
            "final state key equals the starting state key".to_string()
        } else if novel.is_empty() {
            "page changed without exposing new interactive elements".to_string()
        } else {
            format!("page changed, new elements: {}", novel.join(", "))
        };
        Ok(VerificationVerdict::new(pass, terminate).with_rationale(rationale))
    }

    fn select(&self, request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        let current = request.current()?;
        let elements = interactive_elements(&current.dom);
        let mut sequences = Vec::new();
        for task in &request.tasks {
            let (actions, consumed) = resolve_prefix(&task.steps, &elements, &current.dom);
            if actions.is_empty() {
                continue;
            }
            let marker = if consumed == task.steps.len() {
                Continuation::Complete
            } else {
                Continuation::Continue
            };
            sequences.push(
                ActionSequence::new(actions)
                    .with_task(&task.name)
                    .with_state(marker),
            );
        }
        Ok(AgentReply {
            sequences,
            completed: false,
            issues: Vec::new(),
        })
    }

    fn advance(&self, request: &PolicyRequest) -> Result<AgentReply, PolicyError> {
        let task = request.task.as_ref().ok_or_else(|| {
            PolicyError::BackendFailure("process request carries no task".into())
        })?;
        let current = request.current()?;
        let elements = interactive_elements(&current.dom);
        let done: usize = request
            .history
            .iter()
            .map(|entry| entry.sequence.actions.len())
            .sum();
        let remaining = task.steps.get(done..).unwrap_or(&[]);
        let (actions, consumed) = resolve_prefix(remaining, &elements, &current.dom);
        let mut sequences = Vec::new();
        if !actions.is_empty() {
            let marker = if consumed == remaining.len() {
                Continuation::Complete
            } else {
                Continuation::Continue
            };
            sequences.push(
                ActionSequence::new(actions)
                    .with_task(&task.name)
                    .with_state(marker),
            );
        }
        Ok(AgentReply {
            sequences,
            completed: false,
            issues: Vec::new(),
        })
    }

    fn judge(&self, request: &PolicyRequest) -> Result<JudgeVerdict, PolicyError> {
        if request.states.len() < 2 {
            return Ok(JudgeVerdict {
                passed: false,
                rationale: "no post-interaction state to compare".into(),
            });
        }
        let first = request.initial()?;
        let last = request.current()?;
        let passed = masked_outline(&first.dom) != masked_outline(&last.dom);
        let rationale = if passed {
            "final page differs from the starting page beyond typed text".to_string()
        } else {
            "final page matches the starting page once typed text is ignored".to_string()
        };
        Ok(JudgeVerdict { passed, rationale })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{load_simulator, PageSource, UIState};
    use crate::policy::{HistoryEntry, RequestKind, Task};

    fn state_of(html: &str) -> UIState {
        load_simulator(PageSource::Inline(html.to_string()))
            .unwrap()
            .current()
            .clone()
    }

    fn propose_on(html: &str, history: Vec<HistoryEntry>) -> Proposals {
        let mut request =
            PolicyRequest::new(RequestKind::Propose, vec![state_of(html)]);
        request.history = history;
        OraclePolicy::new().propose(&request).unwrap()
    }

    fn entry_for(html: &str, sequence: ActionSequence) -> HistoryEntry {
        let state = state_of(html);
        let elements = interactive_elements(&state.dom);
        HistoryEntry {
            descriptors: ActionDescriptor::describe_sequence(&sequence, &elements),
            sequence,
        }
    }

    const COUNTER: &str = concat!(
        "<button data-action=\"increment\" data-target=\"d\">Increment</button>",
        "<button data-action=\"reset-count\" data-target=\"d\">Reset</button>",
        "<p id=\"d\" data-count=\"0\">Count: 0</p>",
    );

    #[test]
    fn counter_yields_one_click_per_button() {
        let proposals = propose_on(COUNTER, vec![]);
        assert!(!proposals.completed);
        let dsl: Vec<String> = proposals
            .sequences
            .iter()
            .map(|s| s.to_dsl().unwrap())
            .collect();
        assert_eq!(dsl, vec!["click[0]", "click[1]"]);
    }

    #[test]
    fn exhausted_page_reports_completed() {
        let history = vec![
            entry_for(COUNTER, ActionSequence::new(vec![Action::Click(0)])),
            entry_for(COUNTER, ActionSequence::new(vec![Action::Click(1)])),
        ];
        let proposals = propose_on(COUNTER, history);
        assert!(proposals.completed);
        assert!(proposals.sequences.is_empty());
    }

    #[test]
    fn form_groups_compose_and_hide_the_submit() {
        let html = concat!(
            "<div id=\"login\">",
            "<input placeholder=\"Username\"><input placeholder=\"Password\">",
            "<button data-action=\"login\" data-form=\"login\" data-target=\"p\" ",
            "data-result=\"e\">Log In</button>",
            "<button data-action=\"close\" data-target=\"login\">Back</button>",
            "<p id=\"e\"></p></div><div id=\"p\" hidden></div>",
        );
        let proposals = propose_on(html, vec![]);
        let dsl: Vec<String> = proposals
            .sequences
            .iter()
            .map(|s| s.to_dsl().unwrap())
            .collect();
        assert_eq!(
            dsl,
            vec![
                "enter[0][sample username], enter[1][sample password], click[2]",
                "click[3]",
            ],
            "fields and submit compose; the extra button stays separate"
        );
    }

    #[test]
    fn lone_inputs_and_selects_propose_directly() {
        let html = concat!(
            "<input aria-label=\"Note\">",
            "<select aria-label=\"Theme\" data-action=\"set-theme\" data-target=\"b\">",
            "<option selected>Light</option><option>Dark</option></select>",
            "<div id=\"b\"></div>",
        );
        let proposals = propose_on(html, vec![]);
        let dsl: Vec<String> = proposals
            .sequences
            .iter()
            .map(|s| s.to_dsl().unwrap())
            .collect();
        assert_eq!(dsl, vec!["enter[0][sample note]", "select[1][Dark]"]);
    }

    #[test]
    fn similar_items_propose_once() {
        let html = concat!(
            "<ul id=\"items\">",
            "<li><span>a</span> <button data-action=\"remove-item\">Delete</button></li>",
            "<li><span>b</span> <button data-action=\"remove-item\">Delete</button></li>",
            "</ul>",
        );
        let proposals = propose_on(html, vec![]);
        assert_eq!(proposals.sequences.len(), 1);
        assert_eq!(proposals.sequences[0].to_dsl().unwrap(), "click[0]");
    }

    fn verify_over(states: Vec<UIState>) -> VerificationVerdict {
        OraclePolicy::new()
            .verify(&PolicyRequest::new(RequestKind::Verify, states))
            .unwrap()
    }

    #[test]
    fn verify_distinguishes_the_three_outcomes() {
        let toggle = concat!(
            "<button data-action=\"toggle\" data-target=\"p\">Open</button>",
            "<div id=\"p\" hidden><button data-action=\"close\" data-target=\"p\">Close</button></div>",
        );
        let mut session = load_simulator(PageSource::Inline(toggle.to_string())).unwrap();
        let start = session.current().clone();
        session.apply(&Action::Click(0)).unwrap();
        let opened = session.current().clone();
        let verdict = verify_over(vec![start.clone(), opened]);
        assert!(verdict.pass);
        assert_eq!(verdict.terminate, Continuation::Continue);

        let mut counter = load_simulator(PageSource::Inline(COUNTER.to_string())).unwrap();
        let c0 = counter.current().clone();
        counter.apply(&Action::Click(0)).unwrap();
        let verdict = verify_over(vec![c0.clone(), counter.current().clone()]);
        assert!(verdict.pass);
        assert_eq!(verdict.terminate, Continuation::Complete);

        let verdict = verify_over(vec![c0.clone(), c0]);
        assert!(!verdict.pass);
        assert_eq!(verdict.terminate, Continuation::Complete);
    }

    #[test]
    fn typing_into_a_field_passes_and_terminates() {
        let mut session =
            load_simulator(PageSource::Inline("<input aria-label=\"Note\">".into())).unwrap();
        let before = session.current().clone();
        session.apply(&Action::Enter(0, "hello".into())).unwrap();
        let verdict = verify_over(vec![before, session.current().clone()]);
        assert!(verdict.pass);
        assert_eq!(verdict.terminate, Continuation::Complete);
    }

    #[test]
    fn select_stage_resolves_the_reachable_prefix() {
        let html = concat!(
            "<button data-action=\"open\" data-target=\"m\">New Entry</button>",
            "<div id=\"m\" hidden><input placeholder=\"Entry text\">",
            "<button data-action=\"save-entry\" data-input=\"e\" data-target=\"l\" ",
            "data-modal=\"m\">Save</button></div><ul id=\"l\"></ul>",
        );
        let state = state_of(html);
        let elements = interactive_elements(&state.dom);
        let open_sig = elements[0].signature.clone();
        let task = Task {
            name: "New Entry - Input Entry text - Save".into(),
            description: String::new(),
            steps: vec![
                TaskStep {
                    kind: ActionKind::Click,
                    signature: open_sig,
                    payload: None,
                    option: None,
                },
                TaskStep {
                    kind: ActionKind::Enter,
                    signature: ElementSignature {
                        tag: "input".into(),
                        label: "Entry text".into(),
                        scope: "/div[1]".into(),
                    },
                    payload: Some("note".into()),
                    option: None,
                },
                TaskStep {
                    kind: ActionKind::Click,
                    signature: ElementSignature {
                        tag: "button".into(),
                        label: "Save".into(),
                        scope: "/div[1]".into(),
                    },
                    payload: None,
                    option: None,
                },
            ],
        };
        let mut request = PolicyRequest::new(RequestKind::ValidateSelect, vec![state]);
        request.tasks = vec![task];
        let reply = OraclePolicy::new().select(&request).unwrap();
        assert_eq!(reply.sequences.len(), 1);
        let seq = &reply.sequences[0];
        assert_eq!(seq.to_dsl().unwrap(), "click[0]", "hidden steps wait");
        assert_eq!(seq.state_marker, Some(Continuation::Continue));
        assert_eq!(
            seq.task_label.as_deref(),
            Some("New Entry - Input Entry text - Save")
        );
    }

    #[test]
    fn judge_ignores_typed_text_but_sees_real_change() {
        let mut session = load_simulator(PageSource::Inline(
            concat!(
                "<div id=\"f\"><input name=\"a\">",
                "<button data-action=\"submit-echo\" data-form=\"f\" data-result=\"o\">Go</button></div>",
                "<p id=\"o\"></p>",
            )
            .to_string(),
        ))
        .unwrap();
        let start = session.current().clone();
        session.apply(&Action::Enter(0, "x".into())).unwrap();
        let typed_only = session.current().clone();

        let judge = |states: Vec<UIState>| {
            let mut request = PolicyRequest::new(RequestKind::ValidateJudge, states);
            request.task = Some(Task {
                name: "Go".into(),
                description: String::new(),
                steps: Vec::new(),
            });
            OraclePolicy::new().judge(&request).unwrap()
        };
        assert!(
            !judge(vec![start.clone(), typed_only.clone()]).passed,
            "typed text alone is not a completed change"
        );

        session.apply(&Action::Click(1)).unwrap();
        let submitted = session.current().clone();
        assert!(judge(vec![start, typed_only, submitted]).passed);
    }
}
