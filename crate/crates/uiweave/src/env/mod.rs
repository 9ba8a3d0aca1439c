//! The controllable environment: load a page, observe screenshot + annotated
//! DOM, execute actions, and report per-step resulting states.
//!
//! Two backends implement the same session surface: an in-process simulator
//! (deterministic, dependency-free) and a remote browser driven over a
//! DevTools-style WebSocket protocol.

pub mod browser;
pub mod protocol;
pub mod simulator;
pub mod testkit;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dom::{
    annotate, render_text, serialize::digest_bytes, state_key, AnnotateOptions, Arena, DomNode,
};
use crate::dsl::{Action, ActionSequence};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("failed to load page: {0}")]
    LoadFailure(String),
    #[error("failed to capture state: {0}")]
    CaptureFailure(String),
    #[error("no interactive element with id {0} in the current page")]
    UnknownTarget(u32),
    #[error("action dispatch failed: {0}")]
    ExecutionFailure(String),
}

/// Where a page comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PageSource {
    File(PathBuf),
    Inline(String),
    Url(String),
}

impl PageSource {
    /// Reads the document text; URLs are only meaningful to the browser
    /// backend.
    pub fn read_html(&self) -> Result<String, EnvError> {
        match self {
            PageSource::File(path) => std::fs::read_to_string(path)
                .map_err(|e| EnvError::LoadFailure(format!("{}: {e}", path.display()))),
            PageSource::Inline(html) => Ok(html.clone()),
            PageSource::Url(url) => Err(EnvError::LoadFailure(format!(
                "cannot read {url} without a browser backend"
            ))),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            PageSource::File(path) => path.display().to_string(),
            PageSource::Inline(_) => "<inline>".to_string(),
            PageSource::Url(url) => url.clone(),
        }
    }
}

/// Screenshot artifact handle: run-dir-relative path (when persisted) plus a
/// content digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenshotRef {
    pub file: Option<String>,
    pub digest: String,
}

/// Writes screenshot artifacts under `<run_dir>/screenshots` with
/// content-digest filenames; the ephemeral variant only digests.
#[derive(Debug, Clone)]
pub struct ArtifactStore {
    dir: Option<PathBuf>,
}

impl ArtifactStore {
    pub fn ephemeral() -> Self {
        ArtifactStore { dir: None }
    }

    pub fn under_run_dir(run_dir: &std::path::Path) -> Result<Self, EnvError> {
        let dir = run_dir.join("screenshots");
        std::fs::create_dir_all(&dir)
            .map_err(|e| EnvError::CaptureFailure(format!("{}: {e}", dir.display())))?;
        Ok(ArtifactStore { dir: Some(dir) })
    }

    pub fn save(&self, bytes: &[u8], ext: &str) -> Result<ScreenshotRef, EnvError> {
        let digest = digest_bytes(bytes);
        let file = match &self.dir {
            None => None,
            Some(dir) => {
                let name = format!("{digest}.{ext}");
                let path = dir.join(&name);
                if !path.exists() {
                    std::fs::write(&path, bytes)
                        .map_err(|e| EnvError::CaptureFailure(format!("{}: {e}", path.display())))?;
                }
                Some(format!("screenshots/{name}"))
            }
        };
        Ok(ScreenshotRef { file, digest })
    }
}

/// One observed page state: content-hash key, screenshot artifact, annotated
/// DOM, and the step at which it was captured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UIState {
    pub state_key: String,
    pub screenshot: ScreenshotRef,
    pub dom: DomNode,
    pub step_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    Simulator,
    Browser,
}

/// Backend contract: navigate, expose the raw document, capture pixels (when
/// the backend renders any), and dispatch events.
pub trait Backend: Send {
    fn kind(&self) -> BackendKind;
    fn navigate(&mut self, source: &PageSource) -> Result<(), EnvError>;
    fn arena(&mut self) -> Result<Arena, EnvError>;
    /// Raw image bytes plus file extension; `None` lets the session fall
    /// back to the deterministic text render.
    fn screenshot(&mut self) -> Result<Option<(Vec<u8>, &'static str)>, EnvError>;
    fn dispatch(&mut self, target: &DomNode, action: &Action) -> Result<(), EnvError>;
}

/// Failure partway through a sequence: the states observed so far plus the
/// failing action index.
#[derive(Debug)]
pub struct SequenceFailure {
    pub states: Vec<UIState>,
    pub failed_index: usize,
    pub error: EnvError,
}

impl std::fmt::Display for SequenceFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "action {} failed: {}", self.failed_index, self.error)
    }
}

/// Single-owner handle on one live page.
pub struct EnvSession {
    backend: Box<dyn Backend>,
    options: AnnotateOptions,
    store: ArtifactStore,
    source: PageSource,
    current: UIState,
    history: Vec<ActionSequence>,
}

/// Loads a page on the given backend and observes the initial state.
pub fn load_page(
    source: PageSource,
    mut backend: Box<dyn Backend>,
    options: AnnotateOptions,
    store: ArtifactStore,
) -> Result<EnvSession, EnvError> {
    backend.navigate(&source)?;
    let mut session = EnvSession {
        backend,
        options,
        store,
        source,
        current: UIState {
            state_key: String::new(),
            screenshot: ScreenshotRef {
                file: None,
                digest: String::new(),
            },
            dom: DomNode {
                node_id: 0,
                tag: "#document".to_string(),
                text_content: String::new(),
                attributes: Default::default(),
                interactive: false,
                xpath: "/".to_string(),
                children: Vec::new(),
                source_id: 0,
            },
            step_index: 0,
        },
        history: Vec::new(),
    };
    session.observe(0)?;
    Ok(session)
}

/// Loads a page on a fresh simulator backend with an ephemeral store.
pub fn load_simulator(source: PageSource) -> Result<EnvSession, EnvError> {
    load_page(
        source,
        Box::new(simulator::SimulatorBackend::new()),
        AnnotateOptions::default(),
        ArtifactStore::ephemeral(),
    )
}

impl EnvSession {
    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    pub fn source(&self) -> &PageSource {
        &self.source
    }

    pub fn current(&self) -> &UIState {
        &self.current
    }

    pub fn history(&self) -> &[ActionSequence] {
        &self.history
    }

    fn observe(&mut self, step_index: u32) -> Result<UIState, EnvError> {
        let arena = self.backend.arena()?;
        let dom = annotate(&arena, &self.options);
        let screenshot = match self.backend.screenshot()? {
            Some((bytes, ext)) => self.store.save(&bytes, ext)?,
            None => self.store.save(render_text(&dom).as_bytes(), "txt")?,
        };
        let state = UIState {
            state_key: state_key(&dom),
            screenshot,
            dom,
            step_index,
        };
        self.current = state.clone();
        Ok(state)
    }

    /// Re-observes the current state; idempotent while no action intervenes.
    pub fn snapshot(&mut self) -> Result<UIState, EnvError> {
        self.observe(self.current.step_index)
    }

    /// Dispatches one action and returns the newly observed state.
    pub fn apply(&mut self, action: &Action) -> Result<UIState, EnvError> {
        let target = self
            .current
            .dom
            .interactive_node(action.target())
            .cloned()
            .ok_or_else(|| EnvError::UnknownTarget(action.target()))?;
        self.backend.dispatch(&target, action)?;
        self.observe(self.current.step_index + 1)
    }

    /// Applies a whole sequence, re-annotating between steps so later ids
    /// bind to the updated page. Appends to history on full success.
    pub fn run_sequence(&mut self, seq: &ActionSequence) -> Result<Vec<UIState>, SequenceFailure> {
        let mut states = Vec::with_capacity(seq.actions.len());
        for (index, action) in seq.actions.iter().enumerate() {
            match self.apply(action) {
                Ok(state) => states.push(state),
                Err(error) => {
                    return Err(SequenceFailure {
                        states,
                        failed_index: index,
                        error,
                    })
                }
            }
        }
        self.history.push(seq.clone());
        Ok(states)
    }
}
