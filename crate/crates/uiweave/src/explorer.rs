//! The perception-action-verification loop. Pop a state off the frontier,
//! ask the policy for candidate sequences, execute each candidate on its own
//! session restored by replaying the state's path from the root, verify the
//! outcome, and grow the interaction graph until the frontier runs dry or
//! the budget does.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{interactive_elements, AnnotateOptions, ElementView};
use crate::dsl::{ActionSequence, Continuation, VerificationVerdict};
use crate::env::simulator::SimulatorBackend;
use crate::env::{load_page, load_simulator, ArtifactStore, EnvError, EnvSession, PageSource, UIState};
use crate::exec::{map_items, ExecMode};
use crate::graph::{Classification, GraphError, InteractionGraph, PopOrder, Transition};
use crate::policy::{
    ActionDescriptor, HistoryEntry, Policy, PolicyError, PolicyRequest, RequestKind,
};

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("invalid budget: {0}")]
    InvalidBudget(String),
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("run directory error: {0}")]
    RunDir(#[from] std::io::Error),
}

/// Exploration limits. Depth counts transitions from the root: a state at
/// depth `max_depth` is recorded but never expanded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExploreBudget {
    pub max_depth: usize,
    pub max_candidates_per_state: usize,
    pub max_total_actions: usize,
    /// Fraction of frontier pops served LIFO, i.e. the depth-first share of
    /// the hybrid strategy. 0 is pure breadth-first, 1 pure depth-first.
    pub strategy_mix: f64,
}

impl Default for ExploreBudget {
    fn default() -> Self {
        ExploreBudget {
            max_depth: 5,
            max_candidates_per_state: 12,
            max_total_actions: 200,
            strategy_mix: 0.5,
        }
    }
}

impl ExploreBudget {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if self.max_depth < 1 || self.max_candidates_per_state < 1 || self.max_total_actions < 1
        {
            return Err(ExploreError::InvalidBudget(
                "all bounds must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.strategy_mix) {
            return Err(ExploreError::InvalidBudget(format!(
                "strategy_mix {} is outside [0, 1]",
                self.strategy_mix
            )));
        }
        Ok(())
    }
}

/// Deterministic interleaving of depth-first and breadth-first pops. An
/// error accumulator spreads the LIFO share evenly: 0.5 alternates, 0.25
/// serves every fourth pop LIFO.
#[derive(Debug, Clone)]
struct StrategyMixer {
    mix: f64,
    credit: f64,
}

impl StrategyMixer {
    fn new(mix: f64) -> Self {
        StrategyMixer { mix, credit: 0.0 }
    }

    fn next(&mut self) -> PopOrder {
        self.credit += self.mix;
        if self.credit >= 1.0 - 1e-9 {
            self.credit -= 1.0;
            PopOrder::Lifo
        } else {
            PopOrder::Fifo
        }
    }
}

/// Key and stored screenshot of one observed state, as the trace saw it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRef {
    pub key: String,
    pub file: Option<String>,
}

/// One candidate execution as it happened, in recording order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExecutedCandidate {
    /// State the candidate ran from.
    pub state_key: String,
    pub sequence: ActionSequence,
    /// The sequence's element identities, resolved where it ran.
    pub descriptors: Vec<ActionDescriptor>,
    /// States observed after each action, even when execution stopped early.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub posts: Vec<StateRef>,
    pub verdict: VerificationVerdict,
    pub classification: Classification,
    /// Environment or policy failure that forced a non-interactive record.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExplorationTrace {
    pub executed: Vec<ExecutedCandidate>,
    pub wall_steps: usize,
}

impl ExplorationTrace {
    pub fn export(&self, path: &Path) -> std::io::Result<()> {
        let body = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        fs::write(path, body)
    }

    pub fn import(path: &Path) -> std::io::Result<Self> {
        let body = fs::read_to_string(path)?;
        serde_json::from_str(&body).map_err(std::io::Error::other)
    }
}

/// Total mapping from verdict to transition classification.
pub fn classify(verdict: &VerificationVerdict) -> Classification {
    Classification::from_verdict(verdict)
}

/// Drops candidates whose descriptor tuple was already executed anywhere in
/// the run, and within the batch keeps only the first of identical tuples.
/// Order is otherwise preserved.
pub fn dedup_candidates(
    candidates: Vec<ActionSequence>,
    elements: &[ElementView],
    executed: &HashSet<Vec<ActionDescriptor>>,
) -> Vec<ActionSequence> {
    let mut seen = executed.clone();
    candidates
        .into_iter()
        .filter(|candidate| seen.insert(ActionDescriptor::describe_sequence(candidate, elements)))
        .collect()
}

/// Mints independent sessions on the same page. Exploration opens one per
/// candidate and restores it by replaying the recorded path, so candidates
/// can run concurrently without sharing live state.
pub trait SessionFactory: Sync {
    fn open(&self) -> Result<EnvSession, EnvError>;
}

impl<F> SessionFactory for F
where
    F: Fn() -> Result<EnvSession, EnvError> + Sync,
{
    fn open(&self) -> Result<EnvSession, EnvError> {
        self()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExploreConfig {
    pub budget: ExploreBudget,
    pub mode: ExecMode,
    /// When set, `graph.json` and `trace.json` land here and policy requests
    /// resolve screenshot files against it.
    pub run_dir: Option<PathBuf>,
}

struct CandidateOutcome {
    sequence: ActionSequence,
    /// Pre-action state followed by the state after each action.
    states: Vec<UIState>,
    error: Option<String>,
}

fn execute_candidate(
    factory: &dyn SessionFactory,
    path: &[ActionSequence],
    expected_key: &str,
    sequence: ActionSequence,
) -> CandidateOutcome {
    let failed = |error: String| CandidateOutcome {
        sequence: sequence.clone(),
        states: Vec::new(),
        error: Some(error),
    };
    let mut session = match factory.open() {
        Ok(session) => session,
        Err(error) => return failed(format!("session open failed: {error}")),
    };
    for step in path {
        if let Err(failure) = session.run_sequence(step) {
            return failed(format!("state restoration failed: {failure}"));
        }
    }
    if session.current().state_key != expected_key {
        return failed("state restoration diverged from the recorded key".into());
    }
    let start = session.current().clone();
    match session.run_sequence(&sequence) {
        Ok(states) => {
            let mut all = Vec::with_capacity(states.len() + 1);
            all.push(start);
            all.extend(states);
            CandidateOutcome {
                sequence,
                states: all,
                error: None,
            }
        }
        Err(failure) => {
            let error = format!("action {} failed: {}", failure.failed_index, failure.error);
            let mut all = vec![start];
            all.extend(failure.states);
            CandidateOutcome {
                sequence,
                states: all,
                error: Some(error),
            }
        }
    }
}

/// Runs the exploration loop. Candidate execution fans out across sessions
/// per `config.mode`; policy calls stay serialized so audit transcripts
/// replay in a deterministic order.
pub fn explore_with(
    factory: &dyn SessionFactory,
    policy: &dyn Policy,
    config: &ExploreConfig,
) -> Result<(InteractionGraph, ExplorationTrace), ExploreError> {
    config.budget.validate()?;
    let budget = &config.budget;
    let root_state = factory.open()?.current().clone();
    let mut graph = InteractionGraph::new(root_state);
    let mut trace = ExplorationTrace::default();
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut executed: HashSet<Vec<ActionDescriptor>> = HashSet::new();
    let mut mixer = StrategyMixer::new(budget.strategy_mix);

    while trace.wall_steps < budget.max_total_actions {
        let Some(state_key) = graph.frontier_pop(mixer.next()) else {
            break;
        };
        let path: Vec<ActionSequence> = {
            let Some(steps) = graph.path_to(&state_key) else {
                continue;
            };
            if steps.len() >= budget.max_depth {
                continue;
            }
            steps.iter().map(|t| t.sequence.clone()).collect()
        };
        let state = graph
            .state(&state_key)
            .expect("frontier states are interned")
            .clone();
        let elements = interactive_elements(&state.dom);

        let mut request = PolicyRequest::new(RequestKind::Propose, vec![state.clone()]);
        request.history = history.clone();
        request.artifact_root = config.run_dir.clone();
        let proposals = policy.propose(&request)?;

        let mut candidates = proposals.sequences;
        candidates.truncate(budget.max_candidates_per_state);
        let mut candidates = dedup_candidates(candidates, &elements, &executed);
        candidates.truncate(budget.max_total_actions - trace.wall_steps);
        if candidates.is_empty() {
            continue;
        }

        let outcomes = map_items(config.mode, candidates, |sequence| {
            execute_candidate(factory, &path, &state_key, sequence)
        });

        for outcome in outcomes {
            let descriptors =
                ActionDescriptor::describe_sequence(&outcome.sequence, &elements);
            let posts: Vec<StateRef> = outcome
                .states
                .iter()
                .skip(1)
                .map(|s| StateRef {
                    key: s.state_key.clone(),
                    file: s.screenshot.file.clone(),
                })
                .collect();
            let (verdict, note) = match outcome.error {
                Some(error) => (
                    VerificationVerdict::new(false, Continuation::Complete)
                        .with_rationale(format!("execution failed: {error}")),
                    Some(error),
                ),
                None => {
                    let mut verify_request =
                        PolicyRequest::new(RequestKind::Verify, outcome.states.clone());
                    verify_request.element_names =
                        descriptors.iter().map(|d| d.to_string()).collect();
                    verify_request.artifact_root = config.run_dir.clone();
                    match policy.verify(&verify_request) {
                        Ok(verdict) => (verdict, None),
                        Err(error) => (
                            VerificationVerdict::new(false, Continuation::Complete)
                                .with_rationale(format!("verification failed: {error}")),
                            Some(error.to_string()),
                        ),
                    }
                }
            };
            // Unverifiable executions are recorded as self-loops: their
            // observed states are not trustworthy graph nodes.
            let intermediate: Vec<String> = if note.is_some() {
                Vec::new()
            } else {
                outcome.states[1..]
                    .iter()
                    .map(|s| s.state_key.clone())
                    .collect()
            };
            if note.is_none() {
                if let Some(last) = outcome.states.last() {
                    graph.intern_state(last.clone());
                }
            }
            let transition = Transition::new(
                state_key.clone(),
                outcome.sequence.clone(),
                intermediate,
                verdict.clone(),
            );
            let classification = transition.classification;
            graph.record_transition(transition)?;
            executed.insert(descriptors.clone());
            history.push(HistoryEntry {
                sequence: outcome.sequence.clone(),
                descriptors: descriptors.clone(),
            });
            trace.executed.push(ExecutedCandidate {
                state_key: state_key.clone(),
                sequence: outcome.sequence,
                descriptors,
                posts,
                verdict,
                classification,
                note,
            });
            trace.wall_steps += 1;
        }
    }

    if let Some(dir) = &config.run_dir {
        fs::create_dir_all(dir)?;
        graph.export(&dir.join("graph.json"))?;
        trace.export(&dir.join("trace.json"))?;
    }
    Ok((graph, trace))
}

/// Simulator-backed exploration with ephemeral artifacts.
pub fn explore_simulator(
    source: &PageSource,
    policy: &dyn Policy,
    budget: ExploreBudget,
) -> Result<(InteractionGraph, ExplorationTrace), ExploreError> {
    let page = source.clone();
    let factory = move || load_simulator(page.clone());
    explore_with(
        &factory,
        policy,
        &ExploreConfig {
            budget,
            ..ExploreConfig::default()
        },
    )
}

/// Simulator-backed exploration that persists the full run directory layout:
/// `graph.json`, `trace.json`, and `screenshots/`.
pub fn explore_into_run_dir(
    source: &PageSource,
    policy: &dyn Policy,
    budget: ExploreBudget,
    mode: ExecMode,
    run_dir: &Path,
) -> Result<(InteractionGraph, ExplorationTrace), ExploreError> {
    let store = ArtifactStore::under_run_dir(run_dir)?;
    let page = source.clone();
    let factory = move || {
        load_page(
            page.clone(),
            Box::new(SimulatorBackend::new()),
            AnnotateOptions::default(),
            store.clone(),
        )
    };
    explore_with(
        &factory,
        policy,
        &ExploreConfig {
            budget,
            mode,
            run_dir: Some(run_dir.to_path_buf()),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Action;
    use crate::policy::{OraclePolicy, ReplayPolicy};

    const COUNTER: &str = concat!(
        "<button data-action=\"increment\" data-target=\"d\">Increment</button>",
        "<button data-action=\"reset-count\" data-target=\"d\">Reset</button>",
        "<p id=\"d\" data-count=\"2\">Count: 2</p>",
    );

    const TOGGLE: &str = concat!(
        "<button data-action=\"toggle\" data-target=\"panel\">Options</button>",
        "<div id=\"panel\" hidden><a>Help</a>",
        "<button data-action=\"close\" data-target=\"panel\">Close</button></div>",
    );

    fn oracle_explore(
        html: &str,
        budget: ExploreBudget,
    ) -> (InteractionGraph, ExplorationTrace) {
        explore_simulator(
            &PageSource::Inline(html.to_string()),
            &OraclePolicy::new(),
            budget,
        )
        .unwrap()
    }

    #[test]
    fn budget_bounds_are_validated() {
        let zero_depth = ExploreBudget {
            max_depth: 0,
            ..ExploreBudget::default()
        };
        assert!(matches!(
            zero_depth.validate(),
            Err(ExploreError::InvalidBudget(_))
        ));
        let bad_mix = ExploreBudget {
            strategy_mix: 1.5,
            ..ExploreBudget::default()
        };
        assert!(matches!(
            bad_mix.validate(),
            Err(ExploreError::InvalidBudget(_))
        ));
    }

    #[test]
    fn mixer_spreads_the_lifo_share_evenly() {
        let orders = |mix: f64, n: usize| {
            let mut mixer = StrategyMixer::new(mix);
            (0..n).map(|_| mixer.next()).collect::<Vec<_>>()
        };
        assert!(orders(1.0, 4).iter().all(|o| *o == PopOrder::Lifo));
        assert!(orders(0.0, 4).iter().all(|o| *o == PopOrder::Fifo));
        assert_eq!(
            orders(0.5, 4),
            vec![PopOrder::Fifo, PopOrder::Lifo, PopOrder::Fifo, PopOrder::Lifo]
        );
        assert_eq!(
            orders(0.25, 4),
            vec![PopOrder::Fifo, PopOrder::Fifo, PopOrder::Fifo, PopOrder::Lifo]
        );
    }

    #[test]
    fn counter_exploration_covers_both_buttons() {
        let (graph, trace) = oracle_explore(COUNTER, ExploreBudget::default());
        assert_eq!(trace.wall_steps, 2);
        assert_eq!(trace.executed.len(), 2);
        assert_eq!(graph.transitions().len(), 2);
        assert!(graph
            .transitions()
            .iter()
            .all(|t| t.classification == Classification::UsableTerminal));
        assert_eq!(graph.state_count(), 3, "root, incremented, reset");
        graph.check_invariants().expect("invariants hold");
    }

    #[test]
    fn toggle_exploration_expands_the_panel_once() {
        let (graph, trace) = oracle_explore(TOGGLE, ExploreBudget::default());
        let kinds: Vec<Classification> = trace
            .executed
            .iter()
            .map(|record| record.classification)
            .collect();
        assert_eq!(
            kinds,
            vec![
                Classification::UsableExpand,
                Classification::NonInteractive,
                Classification::UsableTerminal,
            ],
            "open panel, inert help link, close panel"
        );
        assert_eq!(graph.state_count(), 2, "closing returns to the root state");
        assert!(
            !trace.executed.iter().skip(1).any(|record| {
                record.sequence.actions == vec![Action::Click(0)]
                    && record.classification == Classification::UsableExpand
            }),
            "the toggle is never re-executed from the panel state"
        );
        graph.check_invariants().expect("invariants hold");
    }

    #[test]
    fn action_budget_caps_executed_sequences() {
        let budget = ExploreBudget {
            max_total_actions: 1,
            ..ExploreBudget::default()
        };
        let (graph, trace) = oracle_explore(TOGGLE, budget);
        assert_eq!(trace.wall_steps, 1);
        assert_eq!(graph.transitions().len(), 1);
    }

    #[test]
    fn depth_cap_stops_expansion_not_recording() {
        let budget = ExploreBudget {
            max_depth: 1,
            ..ExploreBudget::default()
        };
        let (graph, trace) = oracle_explore(TOGGLE, budget);
        assert_eq!(trace.wall_steps, 1, "only the root expands");
        assert_eq!(graph.state_count(), 2, "the panel state is still recorded");
        graph.check_invariants().expect("invariants hold");
    }

    #[test]
    fn candidate_failures_are_recorded_not_fatal() {
        let policy = ReplayPolicy::from_responses(["\\boxed{click[9]}"]);
        let (graph, trace) = explore_simulator(
            &PageSource::Inline(COUNTER.to_string()),
            &policy,
            ExploreBudget::default(),
        )
        .unwrap();
        assert_eq!(trace.executed.len(), 1);
        let record = &trace.executed[0];
        assert_eq!(record.classification, Classification::NonInteractive);
        assert!(record.note.as_deref().unwrap().contains("failed"));
        assert_eq!(graph.transitions()[0].to(), graph.root(), "self-loop");
        graph.check_invariants().expect("invariants hold");
    }

    #[test]
    fn duplicate_candidates_collapse_to_one() {
        let session = load_simulator(PageSource::Inline(COUNTER.to_string())).unwrap();
        let elements = interactive_elements(&session.current().dom);
        let twice = vec![
            ActionSequence::new(vec![Action::Click(0)]),
            ActionSequence::new(vec![Action::Click(0)]),
            ActionSequence::new(vec![Action::Click(1)]),
        ];
        let kept = dedup_candidates(twice, &elements, &HashSet::new());
        assert_eq!(kept.len(), 2);

        let executed: HashSet<_> = [ActionDescriptor::describe_sequence(
            &ActionSequence::new(vec![Action::Click(1)]),
            &elements,
        )]
        .into_iter()
        .collect();
        let kept = dedup_candidates(
            vec![ActionSequence::new(vec![Action::Click(1)])],
            &elements,
            &executed,
        );
        assert!(kept.is_empty(), "already-executed tuples are dropped");
    }

    #[test]
    fn run_dir_holds_graph_trace_and_screenshots() {
        let dir = tempfile::tempdir().unwrap();
        let (graph, trace) = explore_into_run_dir(
            &PageSource::Inline(TOGGLE.to_string()),
            &OraclePolicy::new(),
            ExploreBudget::default(),
            ExecMode::Sequential,
            dir.path(),
        )
        .unwrap();
        let restored = InteractionGraph::import(&dir.path().join("graph.json")).unwrap();
        assert_eq!(restored, graph);
        let replayed = ExplorationTrace::import(&dir.path().join("trace.json")).unwrap();
        assert_eq!(replayed.wall_steps, trace.wall_steps);
        let shots: Vec<_> = fs::read_dir(dir.path().join("screenshots"))
            .unwrap()
            .collect();
        assert!(!shots.is_empty(), "states persisted their screenshots");
        for state in graph.states() {
            let file = state.screenshot.file.as_deref().expect("stored artifact");
            assert!(dir.path().join(file).exists());
        }
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_and_sequential_exploration_agree() {
        let source = PageSource::Inline(TOGGLE.to_string());
        let policy = OraclePolicy::new();
        let page = source.clone();
        let factory = move || load_simulator(page.clone());
        let sequential = explore_with(
            &factory,
            &policy,
            &ExploreConfig {
                mode: ExecMode::Sequential,
                ..ExploreConfig::default()
            },
        )
        .unwrap();
        let parallel = explore_with(
            &factory,
            &policy,
            &ExploreConfig {
                mode: ExecMode::Parallel,
                ..ExploreConfig::default()
            },
        )
        .unwrap();
        assert_eq!(sequential.0, parallel.0, "same graph either way");
        assert_eq!(sequential.1.wall_steps, parallel.1.wall_steps);
    }
}
