//! Deterministic fixture generation with ground-truth manifests: pages whose
//! interactive behavior is known in advance, so exploration results can be
//! scored against an exact reference. Also includes the dataset exporters
//! over finished run directories.

pub mod export;
mod templates;

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{
    annotate, interactive_elements, parse_html, to_html, xpath, AnnotateOptions, DomNode,
    ElementSignature, ElementView,
};
use crate::dsl::{ActionKind, DslError};
use crate::graph::{Classification, GraphError};
use crate::metrics::{GoldTransition, PipelineGold};
use crate::policy::oracle::synth_text;
use crate::policy::{ActionDescriptor, Task, TaskStep};

use templates::{PlannedStep, WidgetBlueprint};

pub use export::{
    export_action_dataset, export_ui2code_pairs, export_verification_dataset, read_records,
    write_records, DatasetRecord, RecordKind,
};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unsupported widget: {0}")]
    UnsupportedWidget(String),
    #[error("no control labeled {0:?} on the page")]
    UnknownControl(String),
    #[error("template for {widget} references unknown control {label:?}")]
    MissingElement { widget: String, label: String },
    #[error("run directory is incomplete: {0}")]
    IncompleteRun(String),
    #[error("graph holds no transitions to export")]
    EmptyGraph,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dsl(#[from] DslError),
    #[error("malformed record: {0}")]
    Record(#[from] serde_json::Error),
}

/// The stock widget templates the generator knows how to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    Counter,
    Tabs,
    ModalForm,
    DropdownFilter,
    SearchableList,
    TodoList,
    Accordion,
    Pagination,
    LoginForm,
    TogglePanel,
}

impl WidgetKind {
    pub const ALL: [WidgetKind; 10] = [
        WidgetKind::Counter,
        WidgetKind::Tabs,
        WidgetKind::ModalForm,
        WidgetKind::DropdownFilter,
        WidgetKind::SearchableList,
        WidgetKind::TodoList,
        WidgetKind::Accordion,
        WidgetKind::Pagination,
        WidgetKind::LoginForm,
        WidgetKind::TogglePanel,
    ];

    pub fn id(self) -> &'static str {
        match self {
            WidgetKind::Counter => "counter",
            WidgetKind::Tabs => "tabs",
            WidgetKind::ModalForm => "modal_form",
            WidgetKind::DropdownFilter => "dropdown_filter",
            WidgetKind::SearchableList => "searchable_list",
            WidgetKind::TodoList => "todo_list",
            WidgetKind::Accordion => "accordion",
            WidgetKind::Pagination => "pagination",
            WidgetKind::LoginForm => "login_form",
            WidgetKind::TogglePanel => "toggle_panel",
        }
    }

    pub fn parse(name: &str) -> Result<Self, CorpusError> {
        WidgetKind::ALL
            .into_iter()
            .find(|k| k.id() == name)
            .ok_or_else(|| CorpusError::UnsupportedWidget(name.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestElement {
    pub signature: ElementSignature,
    /// Control kind, i.e. the element tag.
    pub kind: String,
    pub label: String,
}

/// One predicted sequence: its element identities, how its execution will
/// classify, and which controls it newly reveals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestTransition {
    pub descriptors: Vec<ActionDescriptor>,
    pub category: Classification,
    pub new_element_signatures: Vec<ElementSignature>,
}

/// Ground truth for one fixture. The predictions assume an exploration
/// budget wide enough to run every enumerated candidate; the stock corpus
/// stays far below the default limits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub fixture_id: String,
    pub elements: Vec<ManifestElement>,
    pub transitions: Vec<ManifestTransition>,
    pub tasks: Vec<Task>,
    /// Sequences a full enumeration executes, i.e. the expected trace length.
    pub predicted_step_count: usize,
}

impl FixtureManifest {
    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        let body = serde_json::to_string_pretty(self)?;
        Ok(fs::write(path, body)?)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let body = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&body)?)
    }

    /// The scoring reference this manifest induces.
    pub fn to_gold(&self) -> PipelineGold {
        PipelineGold {
            elements: self.elements.iter().map(|e| e.signature.clone()).collect(),
            transitions: self
                .transitions
                .iter()
                .map(|t| GoldTransition {
                    descriptors: t.descriptors.clone(),
                    category: t.category,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub html: String,
    pub manifest: FixtureManifest,
}

impl Fixture {
    /// Writes `page.html` and `manifest.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("page.html"), &self.html)?;
        self.manifest.save(&dir.join("manifest.json"))
    }
}

pub fn load_fixture(dir: &Path) -> Result<Fixture, CorpusError> {
    Ok(Fixture {
        html: fs::read_to_string(dir.join("page.html"))?,
        manifest: FixtureManifest::load(&dir.join("manifest.json"))?,
    })
}

const PAGE_TITLES: &[&str] = &[
    "Workspace",
    "Dashboard",
    "Control Panel",
    "Field Notes",
    "Scratchpad",
];

/// Generates a page from the requested widgets plus the manifest predicting
/// its full exploration. Byte-identical for a fixed seed and spec.
pub fn synth_fixture(seed: u64, spec: &[WidgetKind]) -> Result<Fixture, CorpusError> {
    if spec.is_empty() {
        return Err(CorpusError::UnsupportedWidget("(empty widget list)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let title = templates::pick(&mut rng, PAGE_TITLES);
    let mut sections = Vec::new();
    let mut blueprints: Vec<(String, WidgetBlueprint)> = Vec::new();
    for (i, kind) in spec.iter().enumerate() {
        let blueprint = templates::build(*kind, &mut rng, i + 1);
        sections.push(blueprint.html.clone());
        blueprints.push((format!("{}-{}", kind.id(), i + 1), blueprint));
    }
    let html = format!("<h1>{title}</h1>\n{}\n", sections.join("\n"));
    let fixture_id = spec
        .iter()
        .map(|k| k.id())
        .collect::<Vec<_>>()
        .join("+");
    let manifest = finalize_manifest(fixture_id, &html, blueprints)?;
    Ok(Fixture { html, manifest })
}

/// Annotated view of the page with every `hidden` attribute stripped, so
/// controls inside dialogs and panels resolve to the same signatures they
/// will carry once revealed.
fn revealed_view(html: &str) -> (DomNode, Vec<ElementView>) {
    let mut arena = parse_html(html);
    let ids = arena.descendants(arena.root());
    for id in ids {
        arena.remove_attr(id, "hidden");
    }
    let dom = annotate(&arena, &AnnotateOptions::default());
    let views = interactive_elements(&dom);
    (dom, views)
}

fn wrapper_xpath(dom: &DomNode, wrapper_id: &str) -> Option<String> {
    let mut found = None;
    dom.walk(&mut |node: &DomNode| {
        if found.is_none() && node.attr("id") == Some(wrapper_id) {
            found = Some(node.xpath.clone());
        }
    });
    found
}

fn resolve<'a>(
    subset: &[&'a ElementView],
    wrapper: &str,
    label: &str,
) -> Result<&'a ElementView, CorpusError> {
    subset
        .iter()
        .find(|v| v.label == label)
        .copied()
        .ok_or_else(|| CorpusError::MissingElement {
            widget: wrapper.to_string(),
            label: label.to_string(),
        })
}

fn step_name(step: &PlannedStep, view: &ElementView) -> String {
    match step.kind {
        ActionKind::Click => view.label.clone(),
        ActionKind::Enter => format!("Input {}", view.label),
        ActionKind::Select => format!(
            "Select {}",
            step.option.as_deref().unwrap_or(&view.label)
        ),
    }
}

fn finalize_manifest(
    fixture_id: String,
    html: &str,
    blueprints: Vec<(String, WidgetBlueprint)>,
) -> Result<FixtureManifest, CorpusError> {
    let (dom, views) = revealed_view(html);
    let mut elements = Vec::new();
    let mut seen: HashSet<ElementSignature> = HashSet::new();
    let mut transitions = Vec::new();
    let mut tasks = Vec::new();
    for (wrapper, blueprint) in &blueprints {
        let prefix = wrapper_xpath(&dom, wrapper)
            .map(|x| format!("{x}/"))
            .ok_or_else(|| CorpusError::MissingElement {
                widget: wrapper.clone(),
                label: "(wrapper)".to_string(),
            })?;
        let subset: Vec<&ElementView> =
            views.iter().filter(|v| v.xpath.starts_with(&prefix)).collect();
        for view in &subset {
            if seen.insert(view.signature.clone()) {
                elements.push(ManifestElement {
                    signature: view.signature.clone(),
                    kind: view.tag.clone(),
                    label: view.label.clone(),
                });
            }
        }
        for planned in &blueprint.transitions {
            let mut descriptors = Vec::new();
            for step in &planned.steps {
                let view = resolve(&subset, wrapper, &step.label)?;
                descriptors.push(ActionDescriptor {
                    kind: step.kind,
                    signature: view.signature.clone(),
                    option: step.option.clone(),
                });
            }
            let mut new_sigs = Vec::new();
            for label in &planned.new_elements {
                let signature = resolve(&subset, wrapper, label)?.signature.clone();
                if !new_sigs.contains(&signature) {
                    new_sigs.push(signature);
                }
            }
            transitions.push(ManifestTransition {
                descriptors,
                category: planned.category,
                new_element_signatures: new_sigs,
            });
        }
        for recipe in &blueprint.tasks {
            let mut parts = Vec::new();
            let mut steps = Vec::new();
            for step in recipe {
                let view = resolve(&subset, wrapper, &step.label)?;
                parts.push(step_name(step, view));
                steps.push(TaskStep {
                    kind: step.kind,
                    signature: view.signature.clone(),
                    payload: match step.kind {
                        ActionKind::Enter => Some(synth_text(&view.label)),
                        _ => None,
                    },
                    option: step.option.clone(),
                });
            }
            tasks.push(Task {
                name: parts.join(" - "),
                description: String::new(),
                steps,
            });
        }
    }
    let predicted_step_count = transitions.len();
    Ok(FixtureManifest {
        fixture_id,
        elements,
        transitions,
        tasks,
        predicted_step_count,
    })
}

/// Writes the full ten-fixture corpus under `out`, one directory per widget
/// kind, and returns the fixture directories in kind order. Every fixture
/// uses the same seed; templates draw differently from it.
pub fn synth_corpus(seed: u64, out: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    WidgetKind::ALL
        .iter()
        .map(|kind| {
            let fixture = synth_fixture(seed, &[*kind])?;
            let dir = out.join(kind.id());
            fixture.write_to(&dir)?;
            Ok(dir)
        })
        .collect()
}

/// Re-emits the page with the first control carrying `label` marked broken:
/// it still renders but swallows every event. Hidden controls are fair
/// targets too.
pub fn break_control(html: &str, label: &str) -> Result<String, CorpusError> {
    let mut arena = parse_html(html);
    let (_, views) = revealed_view(html);
    let view = views
        .into_iter()
        .find(|v| v.label == label)
        .ok_or_else(|| CorpusError::UnknownControl(label.to_string()))?;
    let node = xpath::evaluate(&arena, &view.xpath)
        .ok_or_else(|| CorpusError::UnknownControl(label.to_string()))?;
    arena.set_attr(node, "data-broken", "");
    Ok(to_html(&arena))
}

/// A control whose breakage must fail the fixture's first task: the first
/// non-typing step, since typed text alone never counts as completion.
pub fn default_break_label(manifest: &FixtureManifest) -> Option<String> {
    manifest
        .tasks
        .first()?
        .steps
        .iter()
        .find(|s| s.kind != ActionKind::Enter)
        .map(|s| s.signature.label.clone())
}
