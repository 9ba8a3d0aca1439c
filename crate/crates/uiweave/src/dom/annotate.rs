//! Turns a parsed arena into the annotated tree the pipeline observes:
//! non-semantic and hidden nodes dropped, interactive elements numbered,
//! XPaths computed.

use regex::Regex;

use super::{collapse_ws, Arena, Content, DomNode};

/// Tags that never reach the annotated tree.
const DROPPED_TAGS: &[&str] = &["script", "style", "template", "meta", "link", "noscript"];

const INTERACTIVE_TAGS: &[&str] = &["button", "a", "input", "select", "textarea"];

/// Attributes that mark a node as click-handling.
const CLICK_HANDLER_ATTRS: &[&str] = &["onclick", "data-action"];

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    /// Attribute names matching any of these patterns are dropped before
    /// serialization and hashing (session tokens and similar noise).
    pub volatile_attr_patterns: Vec<String>,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        AnnotateOptions {
            volatile_attr_patterns: vec!["^data-session".to_string(), "^nonce$".to_string()],
        }
    }
}

impl AnnotateOptions {
    fn compile(&self) -> Vec<Regex> {
        self.volatile_attr_patterns
            .iter()
            .filter_map(|p| Regex::new(p).ok())
            .collect()
    }
}

fn is_hidden(arena: &Arena, id: usize) -> bool {
    if arena.has_attr(id, "hidden") || arena.attr(id, "aria-hidden") == Some("true") {
        return true;
    }
    if arena.node(id).tag == "input" && arena.attr(id, "type") == Some("hidden") {
        return true;
    }
    arena
        .attr(id, "style")
        .map(|s| s.replace(' ', "").contains("display:none"))
        .unwrap_or(false)
}

fn is_interactive(arena: &Arena, id: usize) -> bool {
    let node = arena.node(id);
    INTERACTIVE_TAGS.contains(&node.tag.as_str())
        || CLICK_HANDLER_ATTRS.iter().any(|a| arena.has_attr(id, *a))
        || arena.attr(id, "role") == Some("button")
}

/// Annotates the arena's visible tree. Interactive nodes receive consecutive
/// ids starting at 0 in document order; remaining nodes continue the
/// numbering. An empty document yields an empty `#document` root.
pub fn annotate(arena: &Arena, opts: &AnnotateOptions) -> DomNode {
    let volatile = opts.compile();
    let mut roots: Vec<DomNode> = Vec::new();
    let top = arena.element_children(arena.root());
    for (index_in_parent, id) in sibling_positions(arena, &top) {
        if let Some(node) = build(arena, id, "", index_in_parent, &volatile) {
            roots.push(node);
        }
    }
    let mut root = match roots.len() {
        1 => roots.pop().expect("one root"),
        _ => DomNode {
            node_id: 0,
            tag: "#document".to_string(),
            text_content: String::new(),
            attributes: Default::default(),
            interactive: false,
            xpath: "/".to_string(),
            children: roots,
            source_id: arena.root(),
        },
    };
    number_nodes(&mut root);
    root
}

/// Pairs each child id with its 1-based position among same-tag element
/// siblings, counted over the raw arena so XPaths stay resolvable even when
/// siblings are filtered from the annotated tree.
fn sibling_positions(arena: &Arena, children: &[usize]) -> Vec<(usize, usize)> {
    let mut counts: std::collections::HashMap<&str, usize> = std::collections::HashMap::new();
    children
        .iter()
        .map(|&id| {
            let tag = arena.node(id).tag.as_str();
            let n = counts.entry(tag).or_insert(0);
            *n += 1;
            (*n, id)
        })
        .collect()
}

fn build(
    arena: &Arena,
    id: usize,
    parent_xpath: &str,
    position: usize,
    volatile: &[Regex],
) -> Option<DomNode> {
    let node = arena.node(id);
    if DROPPED_TAGS.contains(&node.tag.as_str()) || is_hidden(arena, id) {
        return None;
    }
    let xpath = format!("{parent_xpath}/{}[{position}]", node.tag);
    let text: String = node
        .children
        .iter()
        .filter_map(|c| match c {
            Content::Text(t) => Some(t.as_str()),
            Content::Node(_) => None,
        })
        .collect::<Vec<_>>()
        .join(" ");
    let attributes = node
        .attrs
        .iter()
        .filter(|(k, _)| !volatile.iter().any(|re| re.is_match(k)))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let children = sibling_positions(arena, &arena.element_children(id))
        .into_iter()
        .filter_map(|(pos, child)| build(arena, child, &xpath, pos, volatile))
        .collect();
    Some(DomNode {
        node_id: 0,
        tag: node.tag.clone(),
        text_content: collapse_ws(&text),
        attributes,
        interactive: is_interactive(arena, id),
        xpath,
        children,
        source_id: id,
    })
}

fn number_nodes(root: &mut DomNode) {
    let interactive_count = count_interactive(root);
    let mut next_interactive = 0;
    let mut next_other = interactive_count;
    assign(root, &mut next_interactive, &mut next_other);
}

fn count_interactive(node: &DomNode) -> u32 {
    node.children
        .iter()
        .map(count_interactive)
        .sum::<u32>()
        + u32::from(node.interactive)
}

fn assign(node: &mut DomNode, next_interactive: &mut u32, next_other: &mut u32) {
    if node.interactive {
        node.node_id = *next_interactive;
        *next_interactive += 1;
    } else {
        node.node_id = *next_other;
        *next_other += 1;
    }
    for child in &mut node.children {
        assign(child, next_interactive, next_other);
    }
}
