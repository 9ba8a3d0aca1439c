//! Turns finished runs into training-style datasets: one JSON record per
//! line. Three record shapes come out of the same artifacts: propose-next
//! actions from a state, judge an executed sequence, and render a whole
//! interaction graph back to code.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::CorpusError;
use crate::dom::{interactive_elements, outline};
use crate::explorer::{ExecutedCandidate, ExplorationTrace};
use crate::graph::InteractionGraph;
use crate::policy::ActionDescriptor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordKind {
    /// Given a state and history, produce the next action sequences.
    #[serde(rename = "action")]
    ActionGen,
    /// Given before/after evidence, judge whether a sequence worked.
    #[serde(rename = "verification")]
    Verification,
    /// Given the screenshot walk of a page, reproduce its code.
    #[serde(rename = "ui2code")]
    UI2Code,
}

/// One dataset line: a kind tag plus the free-form payload for that kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub kind: RecordKind,
    pub payload: serde_json::Value,
}

impl DatasetRecord {
    pub fn to_line(&self) -> Result<String, CorpusError> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_line(line: &str) -> Result<Self, CorpusError> {
        Ok(serde_json::from_str(line)?)
    }
}

pub fn write_records(path: &Path, records: &[DatasetRecord]) -> Result<(), CorpusError> {
    let mut body = String::new();
    for record in records {
        body.push_str(&record.to_line()?);
        body.push('\n');
    }
    Ok(fs::write(path, body)?)
}

pub fn read_records(path: &Path) -> Result<Vec<DatasetRecord>, CorpusError> {
    fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(DatasetRecord::from_line)
        .collect()
}

fn load_run(run_dir: &Path) -> Result<(InteractionGraph, ExplorationTrace), CorpusError> {
    let graph_path = run_dir.join("graph.json");
    let trace_path = run_dir.join("trace.json");
    if !graph_path.exists() || !trace_path.exists() {
        return Err(CorpusError::IncompleteRun(format!(
            "{} lacks graph.json or trace.json",
            run_dir.display()
        )));
    }
    let graph = InteractionGraph::import(&graph_path)?;
    let trace = ExplorationTrace::import(&trace_path)?;
    if trace.executed.is_empty() {
        return Err(CorpusError::IncompleteRun(
            "trace holds no executed candidates".into(),
        ));
    }
    Ok((graph, trace))
}

fn state_missing(key: &str) -> CorpusError {
    CorpusError::IncompleteRun(format!("trace references state {key} absent from the graph"))
}

/// One record per state the run proposed from, in first-visit order:
/// the state's evidence, everything executed before reaching it, and the
/// sequences that verified as working there. States whose proposals all
/// failed to resolve leave no trace entries and hence no record.
pub fn export_action_dataset(run_dir: &Path) -> Result<Vec<DatasetRecord>, CorpusError> {
    let (graph, trace) = load_run(run_dir)?;
    let mut groups: IndexMap<&str, (usize, Vec<&ExecutedCandidate>)> = IndexMap::new();
    for (index, record) in trace.executed.iter().enumerate() {
        groups
            .entry(record.state_key.as_str())
            .or_insert_with(|| (index, Vec::new()))
            .1
            .push(record);
    }
    let mut out = Vec::new();
    for (key, (first_index, records)) in &groups {
        let state = graph.state(key).ok_or_else(|| state_missing(key))?;
        let history = trace.executed[..*first_index]
            .iter()
            .map(|r| r.sequence.to_boxed())
            .collect::<Result<Vec<_>, _>>()?;
        let gold = records
            .iter()
            .filter(|r| r.verdict.pass)
            .map(|r| r.sequence.to_boxed())
            .collect::<Result<Vec<_>, _>>()?;
        out.push(DatasetRecord {
            kind: RecordKind::ActionGen,
            payload: json!({
                "screenshot": state.screenshot.file,
                "dom": outline(&state.dom),
                "history": history,
                "gold": gold,
            }),
        });
    }
    Ok(out)
}

/// One record per executed candidate: the state it ran from, the plain
/// sequence, the screenshot taken after each action, and the binary reward
/// the verifier assigned.
pub fn export_verification_dataset(run_dir: &Path) -> Result<Vec<DatasetRecord>, CorpusError> {
    let (graph, trace) = load_run(run_dir)?;
    trace
        .executed
        .iter()
        .map(|record| {
            let state = graph
                .state(&record.state_key)
                .ok_or_else(|| state_missing(&record.state_key))?;
            let after: Vec<Option<String>> =
                record.posts.iter().map(|p| p.file.clone()).collect();
            Ok(DatasetRecord {
                kind: RecordKind::Verification,
                payload: json!({
                    "before": state.screenshot.file,
                    "sequence": record.sequence.to_dsl()?,
                    "after": after,
                    "r": if record.verdict.pass { 1 } else { 0 },
                }),
            })
        })
        .collect()
}

/// Pairs a graph's screenshot walk with the page code that produced it.
/// States are numbered 1-based in discovery order; screenshots that are
/// neither the entry view nor the walk's final view are marked elidable so
/// downstream consumers can thin long walks.
pub fn export_ui2code_pairs(
    graph: &InteractionGraph,
    code: &str,
) -> Result<DatasetRecord, CorpusError> {
    let index: HashMap<&str, usize> = graph
        .states()
        .enumerate()
        .map(|(i, s)| (s.state_key.as_str(), i + 1))
        .collect();
    let mut ops = Vec::new();
    for transition in graph.transitions() {
        if !transition.classification.is_usable() {
            continue;
        }
        let from_state = graph
            .state(&transition.from)
            .ok_or_else(|| state_missing(&transition.from))?;
        let from_image = index[transition.from.as_str()];
        let to_image = *index
            .get(transition.to())
            .ok_or_else(|| state_missing(transition.to()))?;
        let elements = interactive_elements(&from_state.dom);
        let descriptors = ActionDescriptor::describe_sequence(&transition.sequence, &elements);
        let description = if descriptors.is_empty() {
            transition.sequence.to_dsl()?
        } else {
            descriptors
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        ops.push((from_image, to_image, description));
    }
    if ops.is_empty() {
        return Err(CorpusError::EmptyGraph);
    }
    let final_image = ops.last().map(|(_, to, _)| *to).unwrap_or(1);
    let images: Vec<serde_json::Value> = graph
        .states()
        .enumerate()
        .map(|(i, state)| {
            let image = i + 1;
            json!({
                "image": image,
                "screenshot": state.screenshot.file,
                "elidable": image != 1 && image != final_image,
            })
        })
        .collect();
    let narrative = ops
        .iter()
        .map(|(from, to, desc)| format!("image {from} to image {to}: {desc}"))
        .collect::<Vec<_>>()
        .join("; ");
    let target = format!("<think>{narrative}</think><answer>{code}</answer>");
    Ok(DatasetRecord {
        kind: RecordKind::UI2Code,
        payload: json!({
            "images": images,
            "ops": ops
                .iter()
                .map(|(from, to, desc)| json!({
                    "from_image": from,
                    "to_image": to,
                    "description": desc,
                }))
                .collect::<Vec<_>>(),
            "target": target,
        }),
    })
}
