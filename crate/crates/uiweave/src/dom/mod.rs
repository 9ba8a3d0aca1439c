//! Document model: a mutable arena the backends operate on, plus the
//! annotated `DomNode` tree the rest of the pipeline consumes.

pub mod annotate;
pub mod parse;
pub mod serialize;
pub mod xpath;

pub use annotate::{annotate, AnnotateOptions};
pub use parse::{escape_html, parse_fragment_into, parse_html};
pub use serialize::{outline, render_text, state_key, to_html};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Child slot of an arena element: a nested element or a text run.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Node(usize),
    Text(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArenaNode {
    pub tag: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Content>,
    pub parent: usize,
}

/// Flat element store; node 0 is the synthetic `#document` root. Removed
/// nodes are detached, never reused.
#[derive(Debug, Clone, PartialEq)]
pub struct Arena {
    nodes: Vec<ArenaNode>,
}

impl Default for Arena {
    fn default() -> Self {
        Arena::new()
    }
}

impl Arena {
    pub fn new() -> Self {
        Arena {
            nodes: vec![ArenaNode {
                tag: "#document".to_string(),
                attrs: Vec::new(),
                children: Vec::new(),
                parent: usize::MAX,
            }],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, id: usize) -> &ArenaNode {
        &self.nodes[id]
    }

    pub fn try_node(&self, id: usize) -> Option<&ArenaNode> {
        self.nodes.get(id)
    }

    pub fn node_mut(&mut self, id: usize) -> &mut ArenaNode {
        &mut self.nodes[id]
    }

    pub fn add_element(&mut self, parent: usize, tag: &str, attrs: Vec<(String, String)>) -> usize {
        let id = self.nodes.len();
        self.nodes.push(ArenaNode {
            tag: tag.to_string(),
            attrs,
            children: Vec::new(),
            parent,
        });
        self.nodes[parent].children.push(Content::Node(id));
        id
    }

    pub fn add_text(&mut self, parent: usize, text: String) {
        self.nodes[parent].children.push(Content::Text(text));
    }

    pub fn attr(&self, id: usize, name: &str) -> Option<&str> {
        self.nodes[id]
            .attrs
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    pub fn has_attr(&self, id: usize, name: &str) -> bool {
        self.attr(id, name).is_some()
    }

    pub fn set_attr(&mut self, id: usize, name: &str, value: &str) {
        let node = &mut self.nodes[id];
        match node.attrs.iter_mut().find(|(k, _)| k == name) {
            Some((_, v)) => *v = value.to_string(),
            None => node.attrs.push((name.to_string(), value.to_string())),
        }
    }

    pub fn remove_attr(&mut self, id: usize, name: &str) {
        self.nodes[id].attrs.retain(|(k, _)| k != name);
    }

    /// Replaces all children with a single text run.
    pub fn set_text(&mut self, id: usize, text: &str) {
        self.nodes[id].children = vec![Content::Text(text.to_string())];
    }

    /// Concatenated text of the node's subtree, whitespace collapsed.
    pub fn subtree_text(&self, id: usize) -> String {
        let mut out = String::new();
        self.collect_text(id, &mut out);
        collapse_ws(&out)
    }

    fn collect_text(&self, id: usize, out: &mut String) {
        for child in &self.nodes[id].children {
            match child {
                Content::Text(t) => {
                    out.push(' ');
                    out.push_str(t);
                }
                Content::Node(k) => self.collect_text(*k, out),
            }
        }
    }

    /// Detaches `id` from its parent.
    pub fn remove_node(&mut self, id: usize) {
        let parent = self.nodes[id].parent;
        if parent == usize::MAX {
            return;
        }
        self.nodes[parent]
            .children
            .retain(|c| !matches!(c, Content::Node(k) if *k == id));
    }

    pub fn element_children(&self, id: usize) -> Vec<usize> {
        self.nodes[id]
            .children
            .iter()
            .filter_map(|c| match c {
                Content::Node(k) => Some(*k),
                Content::Text(_) => None,
            })
            .collect()
    }

    /// Pre-order element ids under (and excluding) `from`.
    pub fn descendants(&self, from: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack: Vec<usize> = self.element_children(from).into_iter().rev().collect();
        while let Some(id) = stack.pop() {
            out.push(id);
            for child in self.element_children(id).into_iter().rev() {
                stack.push(child);
            }
        }
        out
    }

    /// First descendant (pre-order) satisfying the predicate.
    pub fn find(&self, pred: impl Fn(usize, &ArenaNode) -> bool) -> Option<usize> {
        self.descendants(self.root())
            .into_iter()
            .find(|&id| pred(id, self.node(id)))
    }

    pub fn find_by_attr(&self, name: &str, value: &str) -> Option<usize> {
        self.find(|id, _| self.attr(id, name) == Some(value))
    }

    /// Nearest ancestor (including `id` itself) with the given tag.
    pub fn closest_tag(&self, id: usize, tag: &str) -> Option<usize> {
        let mut cur = id;
        while cur != usize::MAX && cur != self.root() {
            if self.nodes[cur].tag == tag {
                return Some(cur);
            }
            cur = self.nodes[cur].parent;
        }
        None
    }
}

pub fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Annotated element tree observed by the pipeline. Interactive nodes carry
/// consecutive ids starting at 0 in document order; remaining nodes continue
/// the numbering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomNode {
    pub node_id: u32,
    pub tag: String,
    pub text_content: String,
    pub attributes: IndexMap<String, String>,
    pub interactive: bool,
    pub xpath: String,
    pub children: Vec<DomNode>,
    /// Arena id of the node this was annotated from.
    pub source_id: usize,
}

impl DomNode {
    /// Concatenated subtree text, whitespace collapsed.
    pub fn subtree_text(&self) -> String {
        let mut out = String::new();
        self.collect_text(&mut out);
        collapse_ws(&out)
    }

    fn collect_text(&self, out: &mut String) {
        out.push(' ');
        out.push_str(&self.text_content);
        for child in &self.children {
            child.collect_text(out);
        }
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).map(String::as_str)
    }

    /// Depth-first search for the interactive element with the given id.
    pub fn interactive_node(&self, id: u32) -> Option<&DomNode> {
        if self.interactive && self.node_id == id {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.interactive_node(id))
    }

    pub fn walk(&self, visit: &mut impl FnMut(&DomNode)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }
}

/// Stable identity of a control across page states: what it is, what it says,
/// and which labeled region it lives in. Two delete buttons in sibling rows
/// of one list share a signature; the same label under a different region
/// does not.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElementSignature {
    pub tag: String,
    pub label: String,
    pub scope: String,
}

impl std::fmt::Display for ElementSignature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}@{}", self.tag, self.label, self.scope)
    }
}

/// One interactive element as seen by policies and metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementView {
    pub id: u32,
    pub tag: String,
    pub label: String,
    pub xpath: String,
    pub signature: ElementSignature,
}

const LABEL_MAX: usize = 64;

fn element_label(node: &DomNode) -> String {
    let from_attrs = |keys: &[&str]| {
        keys.iter()
            .find_map(|k| node.attr(k).filter(|v| !v.trim().is_empty()))
            .map(|v| collapse_ws(v))
    };
    let label = match node.tag.as_str() {
        "input" | "textarea" => from_attrs(&["aria-label", "placeholder", "name", "id"]),
        "select" => from_attrs(&["aria-label", "name", "id"]),
        _ => Some(node.subtree_text())
            .filter(|t| !t.is_empty())
            .or_else(|| from_attrs(&["aria-label", "title", "name", "id"])),
    }
    .unwrap_or_default();
    label.chars().take(LABEL_MAX).collect()
}

/// Lists the interactive elements of an annotated tree in id order, with
/// signatures scoped to the nearest ancestor carrying an `id` attribute.
pub fn interactive_elements(root: &DomNode) -> Vec<ElementView> {
    let mut out = Vec::new();
    let mut scopes: Vec<String> = Vec::new();
    collect_interactive(root, &mut scopes, &mut out);
    out.sort_by_key(|v| v.id);
    out
}

fn collect_interactive(node: &DomNode, scopes: &mut Vec<String>, out: &mut Vec<ElementView>) {
    if node.interactive {
        let scope = scopes.last().cloned().unwrap_or_else(|| "/".to_string());
        out.push(ElementView {
            id: node.node_id,
            tag: node.tag.clone(),
            label: element_label(node),
            xpath: node.xpath.clone(),
            signature: ElementSignature {
                tag: node.tag.clone(),
                label: element_label(node),
                scope,
            },
        });
    }
    let pushed = node.attr("id").is_some();
    if pushed {
        scopes.push(node.xpath.clone());
    }
    for child in &node.children {
        collect_interactive(child, scopes, out);
    }
    if pushed {
        scopes.pop();
    }
}
