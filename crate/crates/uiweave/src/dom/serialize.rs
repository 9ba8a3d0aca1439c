//! Canonical text forms of an annotated tree: the indented outline that
//! feeds prompts and hashing, and the flat render that stands in for a
//! screenshot on the simulator backend.

use sha2::{Digest, Sha256};

use super::parse::{escape_html, RAW_TEXT_TAGS, VOID_TAGS};
use super::{Arena, Content, DomNode};

/// Indented `tag attr="v" [id=N] "text"` outline. This exact serialization
/// is both the prompt's page-information block and the normalized form that
/// `state_key` hashes.
pub fn outline(root: &DomNode) -> String {
    let mut out = String::new();
    if root.tag == "#document" {
        for child in &root.children {
            write_outline(child, 0, &mut out);
        }
    } else {
        write_outline(root, 0, &mut out);
    }
    out
}

fn write_outline(node: &DomNode, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    out.push_str(&node.tag);
    for (k, v) in &node.attributes {
        out.push(' ');
        out.push_str(k);
        out.push_str("=\"");
        out.push_str(&v.replace('"', "\\\""));
        out.push('"');
    }
    if node.interactive {
        out.push_str(&format!(" [id={}]", node.node_id));
    }
    if !node.text_content.is_empty() {
        out.push_str(&format!(" {:?}", node.text_content));
    }
    out.push('\n');
    for child in &node.children {
        write_outline(child, depth + 1, out);
    }
}

/// Content hash of the normalized outline; equal keys imply byte-identical
/// outlines.
pub fn state_key(root: &DomNode) -> String {
    let mut hasher = Sha256::new();
    hasher.update(outline(root).as_bytes());
    hex::encode(hasher.finalize())
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// Deterministic flat render of the visible page, used as the simulator's
/// screenshot artifact.
pub fn render_text(root: &DomNode) -> String {
    let mut lines = Vec::new();
    render_node(root, &mut lines);
    let mut out = lines.join("\n");
    out.push('\n');
    out
}

fn render_node(node: &DomNode, lines: &mut Vec<String>) {
    match node.tag.as_str() {
        "title" => {
            lines.push(format!("=== {} ===", node.subtree_text()));
            return;
        }
        "h1" | "h2" | "h3" | "h4" | "h5" | "h6" => {
            let level = node.tag[1..].parse::<usize>().unwrap_or(1);
            lines.push(format!("{} {}", "#".repeat(level), node.subtree_text()));
            return;
        }
        "button" => {
            lines.push(format!("[ {} ]", node.subtree_text()));
            return;
        }
        "a" => {
            lines.push(format!("<{}>", node.subtree_text()));
            return;
        }
        "input" | "textarea" => {
            let name = ["aria-label", "placeholder", "name", "id"]
                .iter()
                .find_map(|k| node.attr(k))
                .unwrap_or("input");
            let value = node.attr("value").unwrap_or("");
            lines.push(format!("[{name}: {value}]"));
            return;
        }
        "select" => {
            let name = ["aria-label", "name", "id"]
                .iter()
                .find_map(|k| node.attr(k))
                .unwrap_or("select");
            let options: Vec<String> = node
                .children
                .iter()
                .filter(|c| c.tag == "option")
                .map(|o| {
                    let star = if o.attr("selected").is_some() { "*" } else { "" };
                    format!("{}{star}", o.subtree_text())
                })
                .collect();
            lines.push(format!("[{name}: {}]", options.join("|")));
            return;
        }
        "li" => {
            let mut line = format!("- {}", node.text_content);
            let mut nested = Vec::new();
            for child in &node.children {
                render_node(child, &mut nested);
            }
            if !nested.is_empty() {
                line = format!("{} {}", line.trim_end(), nested.join(" "));
            }
            lines.push(line);
            return;
        }
        _ => {}
    }
    if !node.text_content.is_empty() {
        lines.push(node.text_content.clone());
    }
    for child in &node.children {
        render_node(child, lines);
    }
}

/// Serializes a raw arena back to markup. Round-trips through the parser:
/// `parse_html(to_html(a))` reproduces `a` for any arena the parser built.
pub fn to_html(arena: &Arena) -> String {
    let mut out = String::new();
    for content in &arena.node(arena.root()).children {
        write_html(arena, content, &mut out);
    }
    out
}

fn write_html(arena: &Arena, content: &Content, out: &mut String) {
    let id = match content {
        Content::Text(text) => {
            out.push_str(&escape_html(text));
            return;
        }
        Content::Node(id) => *id,
    };
    let node = arena.node(id);
    out.push('<');
    out.push_str(&node.tag);
    for (name, value) in &node.attrs {
        out.push(' ');
        out.push_str(name);
        out.push_str("=\"");
        out.push_str(&escape_html(value));
        out.push('"');
    }
    out.push('>');
    if VOID_TAGS.contains(&node.tag.as_str()) {
        return;
    }
    if RAW_TEXT_TAGS.contains(&node.tag.as_str()) {
        for child in &node.children {
            if let Content::Text(text) = child {
                out.push_str(text);
            }
        }
    } else {
        for child in &node.children {
            write_html(arena, child, out);
        }
    }
    out.push_str("</");
    out.push_str(&node.tag);
    out.push('>');
}
