//! The interaction graph: discovered page states as nodes, verified action
//! sequences as edges, plus the frontier of states still waiting to be
//! expanded. Append-only during a run.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{ActionSequence, Continuation, VerificationVerdict};
use crate::env::UIState;

pub const GRAPH_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("transition endpoint {0} is not an interned state")]
    DanglingEndpoint(String),
    #[error("graph file error: {0}")]
    SerializationFailure(#[from] std::io::Error),
    #[error("graph schema mismatch: {0}")]
    SchemaMismatch(String),
}

/// What verification concluded about an executed sequence.
///
/// A failed verdict means the page did not usably change; a passed verdict
/// splits on whether the reached state still has unexplored interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    NonInteractive,
    UsableTerminal,
    UsableExpand,
}

impl Classification {
    pub fn from_verdict(verdict: &VerificationVerdict) -> Self {
        if !verdict.pass {
            Classification::NonInteractive
        } else if verdict.terminate == Continuation::Continue {
            Classification::UsableExpand
        } else {
            Classification::UsableTerminal
        }
    }

    pub fn is_usable(self) -> bool {
        self != Classification::NonInteractive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub from: String,
    pub sequence: ActionSequence,
    /// State key after each action; the last entry is the edge target.
    pub intermediate: Vec<String>,
    pub verdict: VerificationVerdict,
    pub classification: Classification,
}

impl Transition {
    pub fn new(
        from: impl Into<String>,
        sequence: ActionSequence,
        intermediate: Vec<String>,
        verdict: VerificationVerdict,
    ) -> Self {
        let classification = Classification::from_verdict(&verdict);
        Transition {
            from: from.into(),
            sequence,
            intermediate,
            verdict,
            classification,
        }
    }

    /// Edge target: where the page ended up. A sequence that produced no
    /// states leaves the session where it started.
    pub fn to(&self) -> &str {
        self.intermediate.last().map_or(&self.from, String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PopOrder {
    /// Breadth-first expansion.
    Fifo,
    /// Depth-first expansion.
    Lifo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionGraph {
    root: String,
    states: IndexMap<String, UIState>,
    transitions: Vec<Transition>,
    frontier: VecDeque<String>,
    expanded: IndexSet<String>,
}

impl InteractionGraph {
    /// A fresh graph rooted at the page's initial state; the root starts on
    /// the frontier.
    pub fn new(root_state: UIState) -> Self {
        let root = root_state.state_key.clone();
        let mut states = IndexMap::new();
        states.insert(root.clone(), root_state);
        InteractionGraph {
            frontier: VecDeque::from([root.clone()]),
            root,
            states,
            transitions: Vec::new(),
            expanded: IndexSet::new(),
        }
    }

    pub fn root(&self) -> &str {
        &self.root
    }

    pub fn state(&self, key: &str) -> Option<&UIState> {
        self.states.get(key)
    }

    pub fn states(&self) -> impl Iterator<Item = &UIState> {
        self.states.values()
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn frontier(&self) -> impl Iterator<Item = &str> {
        self.frontier.iter().map(String::as_str)
    }

    pub fn frontier_len(&self) -> usize {
        self.frontier.len()
    }

    pub fn is_expanded(&self, key: &str) -> bool {
        self.expanded.contains(key)
    }

    /// Dedups by state key. Re-interning a known state is a no-op that
    /// reports `is_new = false`.
    pub fn intern_state(&mut self, state: UIState) -> (String, bool) {
        let key = state.state_key.clone();
        let is_new = !self.states.contains_key(&key);
        if is_new {
            self.states.insert(key.clone(), state);
        }
        (key, is_new)
    }

    /// Appends a verified transition. When the sequence usably expanded the
    /// page, its target joins the frontier unless already expanded or queued.
    pub fn record_transition(&mut self, transition: Transition) -> Result<(), GraphError> {
        if !self.states.contains_key(&transition.from) {
            return Err(GraphError::DanglingEndpoint(transition.from.clone()));
        }
        let to = transition.to().to_string();
        if !self.states.contains_key(&to) {
            return Err(GraphError::DanglingEndpoint(to));
        }
        if transition.classification == Classification::UsableExpand
            && !self.expanded.contains(&to)
            && !self.frontier.contains(&to)
        {
            self.frontier.push_back(to);
        }
        self.transitions.push(transition);
        Ok(())
    }

    /// Pops the next state to expand and marks it expanded. FIFO yields
    /// breadth-first exploration, LIFO depth-first.
    pub fn frontier_pop(&mut self, order: PopOrder) -> Option<String> {
        let key = match order {
            PopOrder::Fifo => self.frontier.pop_front(),
            PopOrder::Lifo => self.frontier.pop_back(),
        }?;
        self.expanded.insert(key.clone());
        Some(key)
    }

    /// Shortest transition path from the root, for restoring a state by
    /// replaying its sequences on a fresh session.
    pub fn path_to(&self, key: &str) -> Option<Vec<&Transition>> {
        if key == self.root {
            return Some(Vec::new());
        }
        let mut previous: IndexMap<&str, &Transition> = IndexMap::new();
        let mut queue = VecDeque::from([self.root.as_str()]);
        while let Some(current) = queue.pop_front() {
            for transition in self.transitions.iter().filter(|t| t.from == current) {
                let to = transition.to();
                if to == self.root || previous.contains_key(to) {
                    continue;
                }
                previous.insert(to, transition);
                if to == key {
                    let mut path = Vec::new();
                    let mut cursor = key;
                    while cursor != self.root {
                        let step = previous[cursor];
                        path.push(step);
                        cursor = &step.from;
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(to);
            }
        }
        None
    }

    /// Structural soundness checks; returns the first violation found.
    pub fn check_invariants(&self) -> Result<(), String> {
        if !self.states.contains_key(&self.root) {
            return Err("root is not an interned state".into());
        }
        for (index, transition) in self.transitions.iter().enumerate() {
            if !self.states.contains_key(&transition.from) {
                return Err(format!("transition {index} has dangling source"));
            }
            if !self.states.contains_key(transition.to()) {
                return Err(format!("transition {index} has dangling target"));
            }
            if transition.classification != Classification::from_verdict(&transition.verdict) {
                return Err(format!(
                    "transition {index} classification disagrees with its verdict"
                ));
            }
        }
        for key in &self.frontier {
            if !self.states.contains_key(key) {
                return Err(format!("frontier entry {key} is not an interned state"));
            }
            if self.expanded.contains(key) {
                return Err(format!("frontier entry {key} was already expanded"));
            }
        }
        let mut reachable: IndexSet<&str> = IndexSet::new();
        reachable.insert(self.root.as_str());
        let mut queue = VecDeque::from([self.root.as_str()]);
        while let Some(current) = queue.pop_front() {
            for transition in self.transitions.iter().filter(|t| t.from == current) {
                let to = transition.to();
                if reachable.insert(to) {
                    queue.push_back(to);
                }
            }
        }
        for key in self.states.keys() {
            if !reachable.contains(key.as_str()) {
                return Err(format!("state {key} is unreachable from the root"));
            }
        }
        Ok(())
    }

    pub fn export(&self, path: &Path) -> Result<(), GraphError> {
        let file = GraphFile {
            version: GRAPH_SCHEMA_VERSION,
            root: self.root.clone(),
            states: self.states.values().cloned().collect(),
            transitions: self.transitions.clone(),
            frontier: self.frontier.iter().cloned().collect(),
            expanded: self.expanded.iter().cloned().collect(),
        };
        let json = serde_json::to_string_pretty(&file)
            .map_err(|e| GraphError::SchemaMismatch(e.to_string()))?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn import(path: &Path) -> Result<Self, GraphError> {
        let raw = fs::read_to_string(path)?;
        let file: GraphFile = serde_json::from_str(&raw)
            .map_err(|e| GraphError::SchemaMismatch(e.to_string()))?;
        if file.version != GRAPH_SCHEMA_VERSION {
            return Err(GraphError::SchemaMismatch(format!(
                "version {}, expected {GRAPH_SCHEMA_VERSION}",
                file.version
            )));
        }
        let graph = InteractionGraph {
            root: file.root,
            states: file
                .states
                .into_iter()
                .map(|s| (s.state_key.clone(), s))
                .collect(),
            transitions: file.transitions,
            frontier: file.frontier.into(),
            expanded: file.expanded.into_iter().collect(),
        };
        if !graph.states.contains_key(&graph.root) {
            return Err(GraphError::SchemaMismatch(
                "root state missing from states".into(),
            ));
        }
        Ok(graph)
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    version: u32,
    root: String,
    states: Vec<UIState>,
    transitions: Vec<Transition>,
    frontier: Vec<String>,
    expanded: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Action;
    use crate::env::ScreenshotRef;

    fn state(tag: &str) -> UIState {
        let dom = crate::dom::annotate(
            &crate::dom::parse_html(&format!("<p>{tag}</p>")),
            &crate::dom::AnnotateOptions::default(),
        );
        UIState {
            state_key: crate::dom::state_key(&dom),
            screenshot: ScreenshotRef {
                file: None,
                digest: tag.to_string(),
            },
            dom,
            step_index: 0,
        }
    }

    fn usable(terminate: Continuation) -> VerificationVerdict {
        VerificationVerdict::new(true, terminate)
    }

    fn seq() -> ActionSequence {
        ActionSequence::new(vec![Action::Click(0)])
    }

    #[test]
    fn intern_dedups_by_key() {
        let mut g = InteractionGraph::new(state("root"));
        let (_, first) = g.intern_state(state("a"));
        let (_, second) = g.intern_state(state("a"));
        assert!(first);
        assert!(!second);
        assert_eq!(g.state_count(), 2);
    }

    #[test]
    fn expand_transitions_feed_the_frontier() {
        let mut g = InteractionGraph::new(state("root"));
        let root = g.root().to_string();
        assert_eq!(g.frontier_pop(PopOrder::Fifo), Some(root.clone()));

        let (a, _) = g.intern_state(state("a"));
        let (b, _) = g.intern_state(state("b"));
        g.record_transition(Transition::new(
            root.clone(),
            seq(),
            vec![a.clone()],
            usable(Continuation::Continue),
        ))
        .unwrap();
        g.record_transition(Transition::new(
            root.clone(),
            seq(),
            vec![b.clone()],
            usable(Continuation::Complete),
        ))
        .unwrap();
        // A failed verdict never queues anything.
        g.record_transition(Transition::new(
            root.clone(),
            seq(),
            vec![root.clone()],
            VerificationVerdict::new(false, Continuation::Continue),
        ))
        .unwrap();
        let frontier: Vec<_> = g.frontier().collect();
        assert_eq!(frontier, vec![a.as_str()], "only the expandable target queues");
        assert!(g.check_invariants().is_ok());
    }

    #[test]
    fn frontier_orders_realize_bfs_and_dfs() {
        let mut g = InteractionGraph::new(state("root"));
        let root = g.frontier_pop(PopOrder::Fifo).unwrap();
        let (a, _) = g.intern_state(state("a"));
        let (b, _) = g.intern_state(state("b"));
        for key in [&a, &b] {
            g.record_transition(Transition::new(
                root.clone(),
                seq(),
                vec![key.clone()],
                usable(Continuation::Continue),
            ))
            .unwrap();
        }
        let mut fifo = g.clone();
        assert_eq!(fifo.frontier_pop(PopOrder::Fifo), Some(a.clone()));
        let mut lifo = g.clone();
        assert_eq!(lifo.frontier_pop(PopOrder::Lifo), Some(b.clone()));
        assert_eq!(g.frontier_pop(PopOrder::Fifo), Some(a.clone()));
        assert_eq!(g.frontier_pop(PopOrder::Fifo), Some(b.clone()));
        assert_eq!(g.frontier_pop(PopOrder::Fifo), None);
    }

    #[test]
    fn expanded_states_do_not_requeue() {
        let mut g = InteractionGraph::new(state("root"));
        let root = g.frontier_pop(PopOrder::Fifo).unwrap();
        let (a, _) = g.intern_state(state("a"));
        g.record_transition(Transition::new(
            root.clone(),
            seq(),
            vec![a.clone()],
            usable(Continuation::Continue),
        ))
        .unwrap();
        assert_eq!(g.frontier_pop(PopOrder::Fifo), Some(a.clone()));
        // A second route to the already-expanded state leaves it off the frontier.
        g.record_transition(Transition::new(
            root,
            seq(),
            vec![a],
            usable(Continuation::Continue),
        ))
        .unwrap();
        assert_eq!(g.frontier_len(), 0);
    }

    #[test]
    fn dangling_endpoints_are_rejected() {
        let mut g = InteractionGraph::new(state("root"));
        let err = g
            .record_transition(Transition::new(
                "nowhere",
                seq(),
                vec![g.root().to_string()],
                usable(Continuation::Complete),
            ))
            .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEndpoint(_)));
        let root = g.root().to_string();
        let err = g
            .record_transition(Transition::new(
                root,
                seq(),
                vec!["nowhere".into()],
                usable(Continuation::Complete),
            ))
            .unwrap_err();
        assert!(matches!(err, GraphError::DanglingEndpoint(_)));
    }

    #[test]
    fn path_to_follows_shortest_route() {
        let mut g = InteractionGraph::new(state("root"));
        let root = g.frontier_pop(PopOrder::Fifo).unwrap();
        let (a, _) = g.intern_state(state("a"));
        let (b, _) = g.intern_state(state("b"));
        g.record_transition(Transition::new(
            root.clone(),
            seq(),
            vec![a.clone()],
            usable(Continuation::Continue),
        ))
        .unwrap();
        g.record_transition(Transition::new(
            a.clone(),
            seq(),
            vec![b.clone()],
            usable(Continuation::Continue),
        ))
        .unwrap();
        // Direct shortcut recorded later still wins by hop count.
        g.record_transition(Transition::new(
            root.clone(),
            ActionSequence::new(vec![Action::Click(1)]),
            vec![b.clone()],
            usable(Continuation::Continue),
        ))
        .unwrap();
        assert_eq!(g.path_to(&root), Some(Vec::new()));
        let path = g.path_to(&b).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path[0].sequence.actions, vec![Action::Click(1)]);
        assert!(g.path_to("missing").is_none());
    }

    #[test]
    fn classification_tracks_verdict() {
        let verdicts = [
            (false, Continuation::Continue, Classification::NonInteractive),
            (false, Continuation::Complete, Classification::NonInteractive),
            (true, Continuation::Continue, Classification::UsableExpand),
            (true, Continuation::Complete, Classification::UsableTerminal),
        ];
        for (pass, terminate, expected) in verdicts {
            let verdict = VerificationVerdict::new(pass, terminate);
            assert_eq!(Classification::from_verdict(&verdict), expected);
        }
    }

    #[test]
    fn export_import_round_trips() {
        let mut g = InteractionGraph::new(state("root"));
        let root = g.frontier_pop(PopOrder::Fifo).unwrap();
        for i in 0..50 {
            let (key, _) = g.intern_state(state(&format!("s{i}")));
            g.record_transition(Transition::new(
                root.clone(),
                ActionSequence::new(vec![Action::Enter(i, format!("v{i}"))]),
                vec![key],
                usable(if i % 2 == 0 {
                    Continuation::Continue
                } else {
                    Continuation::Complete
                }),
            ))
            .unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.export(&path).unwrap();
        let back = InteractionGraph::import(&path).unwrap();
        assert_eq!(back, g);
        assert!(back.check_invariants().is_ok());
    }

    #[test]
    fn truncated_or_missing_files_fail_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        let mut g = InteractionGraph::new(state("root"));
        g.frontier_pop(PopOrder::Fifo);
        g.export(&path).unwrap();

        let full = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &full[..full.len() / 2]).unwrap();
        assert!(matches!(
            InteractionGraph::import(&path),
            Err(GraphError::SchemaMismatch(_))
        ));

        let future = full.replacen("\"version\": 1", "\"version\": 99", 1);
        std::fs::write(&path, future).unwrap();
        assert!(matches!(
            InteractionGraph::import(&path),
            Err(GraphError::SchemaMismatch(_))
        ));

        assert!(matches!(
            InteractionGraph::import(&dir.path().join("absent.json")),
            Err(GraphError::SerializationFailure(_))
        ));
    }

    #[test]
    fn empty_rooted_graph_round_trips() {
        let g = InteractionGraph::new(state("root"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("graph.json");
        g.export(&path).unwrap();
        let back = InteractionGraph::import(&path).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.frontier_len(), 1, "unexpanded root stays queued");
    }
}
