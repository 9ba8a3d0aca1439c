//! The six subcommands. Each returns the process exit code on success and a
//! `CliError` for domain failures; usage problems never reach this layer.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use uiweave::corpus::{
    export_action_dataset, export_ui2code_pairs, export_verification_dataset, load_fixture,
    synth_corpus, synth_fixture, write_records, CorpusError, FixtureManifest, WidgetKind,
};
use uiweave::dom::AnnotateOptions;
use uiweave::dsl::VerificationVerdict;
use uiweave::env::browser::{BrowserBackend, BrowserConfig};
use uiweave::env::{load_page, ArtifactStore, EnvError, PageSource};
use uiweave::exec::ExecMode;
use uiweave::explorer::{
    explore_into_run_dir, explore_with, ExplorationTrace, ExploreConfig, ExploreError,
};
use uiweave::graph::{GraphError, InteractionGraph};
use uiweave::metrics::{
    macro_prf, pipeline_scores, sample_prf, text_table, trace_length, verification_scores,
    MetricsError, MetricsReport, TableColumn,
};
use uiweave::policy::{
    ActionDescriptor, OraclePolicy, Policy, ReplayPolicy, Task, VlmConfig, VlmPolicy,
};
use uiweave::validator::{validate, validate_simulator, ValidateError};

use crate::config::{BackendChoice, ConfigError, PolicyChoice, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error(transparent)]
    Validate(#[from] ValidateError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

fn other(message: impl Into<String>) -> CliError {
    CliError::Other(message.into())
}

/// `page` may be an html file or a fixture directory holding `page.html`.
fn page_source(page: &Path) -> Result<PageSource, CliError> {
    let file = if page.is_dir() {
        page.join("page.html")
    } else {
        page.to_path_buf()
    };
    if !file.is_file() {
        return Err(other(format!("no page at {}", file.display())));
    }
    Ok(PageSource::File(file))
}

fn build_policy(
    config: &RunConfig,
    audit_dir: Option<PathBuf>,
) -> Result<Box<dyn Policy>, CliError> {
    match config.policy {
        PolicyChoice::Oracle => Ok(Box::new(OraclePolicy::new())),
        PolicyChoice::Vlm => {
            let endpoint = config
                .endpoint
                .clone()
                .expect("validated: vlm has an endpoint");
            let mut vlm = VlmConfig::new(endpoint, config.model.clone());
            if let Some(var) = &config.api_key_env {
                vlm = vlm.with_api_key_env(var);
            }
            if let Some(dir) = audit_dir {
                vlm = vlm.with_audit_dir(dir);
            }
            Ok(Box::new(VlmPolicy::new(vlm)))
        }
        PolicyChoice::Replay => {
            let dir = config
                .replay_dir
                .as_ref()
                .expect("validated: replay has a directory");
            Ok(Box::new(ReplayPolicy::from_run_dir(dir)?))
        }
    }
}

fn exec_mode(config: &RunConfig) -> ExecMode {
    if config.parallel {
        ExecMode::default()
    } else {
        ExecMode::Sequential
    }
}

pub fn synth(config: &RunConfig, seed: u64, widgets: &[String]) -> Result<i32, CliError> {
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from("corpus"));
    if widgets.is_empty() {
        let dirs = synth_corpus(seed, &out)?;
        println!("wrote {} fixtures under {}", dirs.len(), out.display());
    } else {
        let kinds = widgets
            .iter()
            .map(|w| WidgetKind::parse(w))
            .collect::<Result<Vec<_>, _>>()?;
        let fixture = synth_fixture(seed, &kinds)?;
        fixture.write_to(&out)?;
        println!(
            "wrote fixture {} under {}",
            fixture.manifest.fixture_id,
            out.display()
        );
    }
    Ok(0)
}

pub fn explore(config: &RunConfig, page: &Path) -> Result<i32, CliError> {
    let source = page_source(page)?;
    let run_dir = config.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    let policy = build_policy(config, Some(run_dir.join("vlm")))?;
    let mode = exec_mode(config);
    let (graph, trace) = match config.backend {
        BackendChoice::Sim => explore_into_run_dir(
            &source,
            policy.as_ref(),
            config.budget.clone(),
            mode,
            &run_dir,
        )?,
        BackendChoice::Browser => {
            let store = ArtifactStore::under_run_dir(&run_dir)?;
            let browser = BrowserConfig::new(
                config
                    .browser_endpoint
                    .clone()
                    .expect("validated: browser has an endpoint"),
            );
            let page = source.clone();
            let factory = move || {
                load_page(
                    page.clone(),
                    Box::new(BrowserBackend::connect(&browser)?),
                    AnnotateOptions::default(),
                    store.clone(),
                )
            };
            explore_with(
                &factory,
                policy.as_ref(),
                &ExploreConfig {
                    budget: config.budget.clone(),
                    mode,
                    run_dir: Some(run_dir.clone()),
                },
            )?
        }
    };
    let usable = graph
        .transitions()
        .iter()
        .filter(|t| t.classification.is_usable())
        .count();
    println!(
        "explored {}: {} states, {} transitions ({} usable), {} steps",
        source.describe(),
        graph.state_count(),
        graph.transitions().len(),
        usable,
        trace.wall_steps,
    );
    println!("artifacts in {}", run_dir.display());
    Ok(0)
}

fn load_tasks(page: &Path, tasks: Option<&Path>) -> Result<Vec<Task>, CliError> {
    if let Some(path) = tasks {
        let body = fs::read_to_string(path)?;
        return Ok(serde_json::from_str(&body)?);
    }
    if page.is_dir() && page.join("manifest.json").is_file() {
        return Ok(load_fixture(page)?.manifest.tasks);
    }
    Err(other(
        "no tasks: pass --tasks FILE or point at a fixture directory",
    ))
}

pub fn validate_page(
    config: &RunConfig,
    page: &Path,
    tasks: Option<&Path>,
) -> Result<i32, CliError> {
    let source = page_source(page)?;
    let task_list = load_tasks(page, tasks)?;
    let policy = build_policy(config)?;
    let report = match config.backend {
        BackendChoice::Sim => {
            validate_simulator(&source, &task_list, policy.as_ref(), config.round_cap)?
        }
        BackendChoice::Browser => {
            let browser = BrowserConfig::new(
                config
                    .browser_endpoint
                    .clone()
                    .expect("validated: browser has an endpoint"),
            );
            let page = source.clone();
            let factory = move || {
                load_page(
                    page.clone(),
                    Box::new(BrowserBackend::connect(&browser)?),
                    AnnotateOptions::default(),
                    ArtifactStore::ephemeral(),
                )
            };
            validate(
                &factory,
                &source.describe(),
                &task_list,
                policy.as_ref(),
                policy.as_ref(),
                config.round_cap,
                exec_mode(config),
            )?
        }
    };
    for result in &report.tasks {
        let mark = if result.passed { "pass" } else { "FAIL" };
        println!("{mark}  {} ({} rounds)", result.task.name, result.rounds);
    }
    println!(
        "pass rate: {:.1}% ({}/{})",
        report.pass_rate,
        report.tasks.iter().filter(|t| t.passed).count(),
        report.tasks.len()
    );
    if let Some(out) = &config.out {
        report.save(out)?;
        println!("report written to {}", out.display());
    }
    Ok(if report.all_passed() { 0 } else { 1 })
}

/// One benchmark sample: model outputs next to the reference answers.
/// Either section may be absent when the sample only exercises one skill.
#[derive(Debug, Deserialize)]
struct BenchmarkEntry {
    #[serde(default)]
    action: Option<DescriptorPair>,
    #[serde(default)]
    verification: Option<VerdictPair>,
}

#[derive(Debug, Deserialize)]
struct DescriptorPair {
    predicted: Vec<ActionDescriptor>,
    gold: Vec<ActionDescriptor>,
}

#[derive(Debug, Deserialize)]
struct VerdictPair {
    predicted: Vec<VerificationVerdict>,
    gold: Vec<VerificationVerdict>,
}

fn sorted_json_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn eval_agent(config: &RunConfig, benchmark: &Path) -> Result<i32, CliError> {
    let files = sorted_json_files(benchmark)?;
    let mut samples = Vec::new();
    let mut predicted_verdicts = Vec::new();
    let mut gold_verdicts = Vec::new();
    for file in &files {
        let entry: BenchmarkEntry = serde_json::from_str(&fs::read_to_string(file)?)?;
        if let Some(pair) = entry.action {
            samples.push(sample_prf(&pair.predicted, &pair.gold)?);
        }
        if let Some(pair) = entry.verification {
            predicted_verdicts.extend(pair.predicted);
            gold_verdicts.extend(pair.gold);
        }
    }
    if samples.is_empty() && predicted_verdicts.is_empty() {
        return Err(other(format!(
            "no benchmark entries under {}",
            benchmark.display()
        )));
    }
    let mut report = MetricsReport::default();
    if !samples.is_empty() {
        let (precision, recall, f1) = macro_prf(&samples)?;
        report.precision = precision;
        report.recall = recall;
        report.f1 = f1;
    }
    if !predicted_verdicts.is_empty() {
        let (pass_acc, terminate_acc, overall_acc) =
            verification_scores(&predicted_verdicts, &gold_verdicts)?;
        report.pass_acc = pass_acc;
        report.terminate_acc = terminate_acc;
        report.overall_acc = overall_acc;
    }
    let label = benchmark
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| benchmark.display().to_string());
    print!(
        "{}",
        text_table(&[(label, report.clone())], TableColumn::AGENT)
    );
    if let Some(out) = &config.out {
        fs::write(out, report.to_json())?;
        println!("report written to {}", out.display());
    }
    Ok(0)
}

pub fn eval_pipeline(config: &RunConfig, runs: &Path, gold: &Path) -> Result<i32, CliError> {
    let mut names: Vec<String> = fs::read_dir(runs)?
        .filter_map(|entry| entry.ok())
        .filter(|e| e.path().join("trace.json").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(other(format!(
            "no run directories with trace.json under {}",
            runs.display()
        )));
    }
    let mut rows = Vec::new();
    for name in &names {
        let manifest_path = gold.join(name).join("manifest.json");
        if !manifest_path.is_file() {
            return Err(other(format!(
                "run {name} has no gold manifest at {}",
                manifest_path.display()
            )));
        }
        let trace = ExplorationTrace::import(&runs.join(name).join("trace.json"))?;
        let manifest = FixtureManifest::load(&manifest_path)?;
        let (completeness, correctness, dedup_rate, overall_score) =
            pipeline_scores(&trace, &manifest.to_gold(), &config.weights)?;
        let steps = trace_length(std::slice::from_ref(&trace))?;
        rows.push((
            name.clone(),
            MetricsReport {
                completeness,
                correctness,
                dedup_rate,
                overall_score,
                mean_trace_length: steps.mean,
                ..MetricsReport::default()
            },
        ));
    }
    let count = rows.len() as f64;
    let mean = MetricsReport {
        completeness: rows.iter().map(|(_, r)| r.completeness).sum::<f64>() / count,
        correctness: rows.iter().map(|(_, r)| r.correctness).sum::<f64>() / count,
        dedup_rate: rows.iter().map(|(_, r)| r.dedup_rate).sum::<f64>() / count,
        overall_score: rows.iter().map(|(_, r)| r.overall_score).sum::<f64>() / count,
        mean_trace_length: rows.iter().map(|(_, r)| r.mean_trace_length).sum::<f64>() / count,
        ..MetricsReport::default()
    };
    rows.push(("mean".to_string(), mean));
    print!("{}", text_table(&rows, TableColumn::PIPELINE));
    if let Some(out) = &config.out {
        let body = serde_json::to_string_pretty(
            &rows
                .iter()
                .map(|(name, report)| serde_json::json!({"run": name, "scores": report}))
                .collect::<Vec<_>>(),
        )?;
        fs::write(out, body)?;
        println!("report written to {}", out.display());
    }
    Ok(0)
}

pub fn export(config: &RunConfig, run: &Path, page: Option<&Path>) -> Result<i32, CliError> {
    let out = config.out.clone().unwrap_or_else(|| run.to_path_buf());
    fs::create_dir_all(&out)?;
    let actions = export_action_dataset(run)?;
    write_records(&out.join("action.jsonl"), &actions)?;
    let verifications = export_verification_dataset(run)?;
    write_records(&out.join("verification.jsonl"), &verifications)?;
    println!(
        "wrote {} action and {} verification records to {}",
        actions.len(),
        verifications.len(),
        out.display()
    );
    if let Some(page) = page {
        let graph = InteractionGraph::import(&run.join("graph.json"))?;
        let code = fs::read_to_string(page)?;
        let pair = export_ui2code_pairs(&graph, &code)?;
        write_records(&out.join("ui2code.jsonl"), &[pair])?;
        println!("wrote 1 ui2code record");
    }
    Ok(0)
}
