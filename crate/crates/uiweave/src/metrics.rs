//! Scoring: per-sample precision/recall/F1 over proposed actions, macro
//! aggregation, verification accuracies, pipeline completeness/correctness/
//! dedup with a weighted overall, and trace-length statistics. All
//! percentages live in [0, 100].

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::ElementSignature;
use crate::dsl::{ActionKind, VerificationVerdict};
use crate::explorer::ExplorationTrace;
use crate::graph::Classification;
use crate::policy::ActionDescriptor;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold reference is empty")]
    EmptyGold,
    #[error("no samples to aggregate")]
    EmptySamples,
    #[error("prediction and gold lengths differ: {predictions} vs {gold}")]
    LengthMismatch { predictions: usize, gold: usize },
    #[error("trace has no executed sequences")]
    EmptyTrace,
}

/// Weights for the overall pipeline score. The defaults are the published
/// ones; they are exposed for configuration but rarely changed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverallWeights {
    pub completeness: f64,
    pub correctness: f64,
    pub dedup: f64,
}

impl Default for OverallWeights {
    fn default() -> Self {
        OverallWeights {
            completeness: 0.40,
            correctness: 0.35,
            dedup: 0.25,
        }
    }
}

impl OverallWeights {
    pub fn overall(&self, completeness: f64, correctness: f64, dedup: f64) -> f64 {
        self.completeness * completeness + self.correctness * correctness + self.dedup * dedup
    }
}

fn match_key(descriptor: &ActionDescriptor) -> (ActionKind, &ElementSignature) {
    (descriptor.kind, &descriptor.signature)
}

/// Precision, recall, F1 for one sample. Actions match on kind and element
/// signature; typed payloads are free-form and never part of the match, and
/// for selects the chosen option is likewise ignored here.
pub fn sample_prf(
    predicted: &[ActionDescriptor],
    gold: &[ActionDescriptor],
) -> Result<(f64, f64, f64), MetricsError> {
    let gold_set: BTreeSet<_> = gold.iter().map(match_key).collect();
    if gold_set.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    let predicted_set: BTreeSet<_> = predicted.iter().map(match_key).collect();
    if predicted_set.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let hits = predicted_set.intersection(&gold_set).count() as f64;
    let precision = 100.0 * hits / predicted_set.len() as f64;
    let recall = 100.0 * hits / gold_set.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Macro aggregation: each column is averaged independently. The aggregate
/// F1 is the mean of per-sample F1 values, which is generally not the
/// harmonic mean of the averaged precision and recall.
pub fn macro_prf(samples: &[(f64, f64, f64)]) -> Result<(f64, f64, f64), MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let n = samples.len() as f64;
    let (p, r, f1) = samples.iter().fold((0.0, 0.0, 0.0), |acc, s| {
        (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2)
    });
    Ok((p / n, r / n, f1 / n))
}

/// Mean of the two verification accuracies.
pub fn verification_overall(pass_acc: f64, terminate_acc: f64) -> f64 {
    (pass_acc + terminate_acc) / 2.0
}

/// Accuracy of predicted verdicts against gold: the fraction of matching
/// pass fields, the fraction of matching termination fields, and their mean.
pub fn verification_scores(
    predictions: &[VerificationVerdict],
    gold: &[VerificationVerdict],
) -> Result<(f64, f64, f64), MetricsError> {
    if predictions.len() != gold.len() {
        return Err(MetricsError::LengthMismatch {
            predictions: predictions.len(),
            gold: gold.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let n = gold.len() as f64;
    let pass_hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.pass == g.pass)
        .count() as f64;
    let terminate_hits = predictions
        .iter()
        .zip(gold)
        .filter(|(p, g)| p.terminate == g.terminate)
        .count() as f64;
    let pass_acc = 100.0 * pass_hits / n;
    let terminate_acc = 100.0 * terminate_hits / n;
    Ok((
        pass_acc,
        terminate_acc,
        verification_overall(pass_acc, terminate_acc),
    ))
}

/// Ground truth for scoring one exploration run: the distinct interactive
/// elements of the page and the expected category per sequence identity.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineGold {
    pub elements: Vec<ElementSignature>,
    pub transitions: Vec<GoldTransition>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GoldTransition {
    pub descriptors: Vec<ActionDescriptor>,
    pub category: Classification,
}

/// Completeness, correctness, dedup rate, and their weighted overall for one
/// exploration trace scored against gold.
///
/// Completeness: share of gold elements touched by at least one executed
/// sequence. Correctness: share of executed sequences whose classification
/// matches the gold category for that sequence identity. Dedup: share of
/// executed sequences that were not repeats of an earlier identity; the
/// first occurrence counts as unique, so order matters here and only here.
pub fn pipeline_scores(
    trace: &ExplorationTrace,
    gold: &PipelineGold,
    weights: &OverallWeights,
) -> Result<(f64, f64, f64, f64), MetricsError> {
    if gold.elements.is_empty() || gold.transitions.is_empty() {
        return Err(MetricsError::EmptyGold);
    }
    if trace.executed.is_empty() {
        return Err(MetricsError::EmptyTrace);
    }
    let n = trace.executed.len() as f64;

    let touched: HashSet<&ElementSignature> = trace
        .executed
        .iter()
        .flat_map(|record| record.descriptors.iter().map(|d| &d.signature))
        .collect();
    let covered = gold
        .elements
        .iter()
        .filter(|signature| touched.contains(signature))
        .count();
    let completeness = 100.0 * covered as f64 / gold.elements.len() as f64;

    let expected: HashMap<&[ActionDescriptor], Classification> = gold
        .transitions
        .iter()
        .map(|t| (t.descriptors.as_slice(), t.category))
        .collect();
    let matching = trace
        .executed
        .iter()
        .filter(|record| expected.get(record.descriptors.as_slice()) == Some(&record.classification))
        .count();
    let correctness = 100.0 * matching as f64 / n;

    let mut seen: HashSet<&[ActionDescriptor]> = HashSet::new();
    let duplicates = trace
        .executed
        .iter()
        .filter(|record| !seen.insert(record.descriptors.as_slice()))
        .count();
    let dedup = 100.0 * (1.0 - duplicates as f64 / n);

    let overall = weights.overall(completeness, correctness, dedup);
    Ok((completeness, correctness, dedup, overall))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceLengthStats {
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

pub fn trace_length(traces: &[ExplorationTrace]) -> Result<TraceLengthStats, MetricsError> {
    if traces.is_empty() {
        return Err(MetricsError::EmptySamples);
    }
    let steps: Vec<usize> = traces.iter().map(|t| t.wall_steps).collect();
    Ok(TraceLengthStats {
        mean: steps.iter().sum::<usize>() as f64 / steps.len() as f64,
        min: *steps.iter().min().expect("non-empty"),
        max: *steps.iter().max().expect("non-empty"),
    })
}

/// Flat bundle of every score the suite produces; fill whichever evaluation
/// ran and leave the rest at zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pass_acc: f64,
    pub terminate_acc: f64,
    pub overall_acc: f64,
    pub completeness: f64,
    pub correctness: f64,
    pub dedup_rate: f64,
    pub overall_score: f64,
    pub mean_trace_length: f64,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Aligned plain-text table. Each row is a label plus selected columns from
/// its report.
pub fn text_table(rows: &[(String, MetricsReport)], columns: &[TableColumn]) -> String {
    let mut widths: Vec<usize> = columns.iter().map(|c| c.header().len()).collect();
    let mut label_width = "run".len();
    let mut cells: Vec<Vec<String>> = Vec::new();
    for (label, report) in rows {
        label_width = label_width.max(label.len());
        let row: Vec<String> = columns
            .iter()
            .map(|column| format!("{:.2}", column.value(report)))
            .collect();
        for (width, cell) in widths.iter_mut().zip(&row) {
            *width = (*width).max(cell.len());
        }
        cells.push(row);
    }
    let mut out = String::new();
    out.push_str(&format!("{:<label_width$}", "run"));
    for (column, width) in columns.iter().zip(&widths) {
        out.push_str(&format!("  {:>width$}", column.header()));
    }
    out.push('\n');
    for ((label, _), row) in rows.iter().zip(&cells) {
        out.push_str(&format!("{label:<label_width$}"));
        for (cell, width) in row.iter().zip(&widths) {
            out.push_str(&format!("  {cell:>width$}"));
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableColumn {
    Precision,
    Recall,
    F1,
    PassAcc,
    TerminateAcc,
    OverallAcc,
    Completeness,
    Correctness,
    DedupRate,
    OverallScore,
    MeanTraceLength,
}

impl TableColumn {
    pub const AGENT: &'static [TableColumn] = &[
        TableColumn::Precision,
        TableColumn::Recall,
        TableColumn::F1,
        TableColumn::PassAcc,
        TableColumn::TerminateAcc,
        TableColumn::OverallAcc,
    ];

    pub const PIPELINE: &'static [TableColumn] = &[
        TableColumn::Completeness,
        TableColumn::Correctness,
        TableColumn::DedupRate,
        TableColumn::OverallScore,
        TableColumn::MeanTraceLength,
    ];

    fn header(&self) -> &'static str {
        match self {
            TableColumn::Precision => "precision",
            TableColumn::Recall => "recall",
            TableColumn::F1 => "f1",
            TableColumn::PassAcc => "pass_acc",
            TableColumn::TerminateAcc => "term_acc",
            TableColumn::OverallAcc => "overall_acc",
            TableColumn::Completeness => "comp",
            TableColumn::Correctness => "correct",
            TableColumn::DedupRate => "dedup",
            TableColumn::OverallScore => "overall",
            TableColumn::MeanTraceLength => "steps",
        }
    }

    fn value(&self, report: &MetricsReport) -> f64 {
        match self {
            TableColumn::Precision => report.precision,
            TableColumn::Recall => report.recall,
            TableColumn::F1 => report.f1,
            TableColumn::PassAcc => report.pass_acc,
            TableColumn::TerminateAcc => report.terminate_acc,
            TableColumn::OverallAcc => report.overall_acc,
            TableColumn::Completeness => report.completeness,
            TableColumn::Correctness => report.correctness,
            TableColumn::DedupRate => report.dedup_rate,
            TableColumn::OverallScore => report.overall_score,
            TableColumn::MeanTraceLength => report.mean_trace_length,
        }
    }
}
