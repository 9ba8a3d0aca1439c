//! Error-tolerant parser for the HTML subset the environment understands.
//!
//! Recovery rules: a close tag matching an open ancestor closes every element
//! in between; a close tag matching nothing is ignored; elements still open
//! at end of input are closed. Comments and doctype/processing instructions
//! are skipped. `script` and `style` bodies are kept as raw text.

use super::Arena;

pub(crate) const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source",
    "track", "wbr",
];

pub(crate) const RAW_TEXT_TAGS: &[&str] = &["script", "style"];

/// Parses a full document into a fresh arena.
pub fn parse_html(input: &str) -> Arena {
    let mut arena = Arena::new();
    let root = arena.root();
    parse_fragment_into(&mut arena, root, input);
    arena
}

/// Parses `input` and appends the resulting nodes under `parent`.
pub fn parse_fragment_into(arena: &mut Arena, parent: usize, input: &str) {
    let mut stack: Vec<usize> = vec![parent];
    let mut pos = 0;
    let len = input.len();

    while pos < len {
        let rest = &input[pos..];
        if let Some(after) = rest.strip_prefix("<!--") {
            pos += 4 + after.find("-->").map(|i| i + 3).unwrap_or(after.len());
        } else if rest.starts_with("</") {
            let end = rest.find('>').map(|i| i + 1).unwrap_or(rest.len());
            let name = rest[2..end.saturating_sub(1)]
                .trim()
                .to_ascii_lowercase();
            close_tag(arena, &mut stack, &name);
            pos += end;
        } else if rest.starts_with("<!") || rest.starts_with("<?") {
            pos += rest.find('>').map(|i| i + 1).unwrap_or(rest.len());
        } else if rest.starts_with('<') && rest[1..].starts_with(|c: char| c.is_ascii_alphabetic())
        {
            let (tag, attrs, self_closing, consumed) = parse_open_tag(rest);
            pos += consumed;
            let node = arena.add_element(*stack.last().expect("stack non-empty"), &tag, attrs);
            if RAW_TEXT_TAGS.contains(&tag.as_str()) && !self_closing {
                let close_pat = format!("</{tag}");
                let body = &input[pos..];
                let lower = body.to_ascii_lowercase();
                match lower.find(&close_pat) {
                    Some(i) => {
                        if !body[..i].trim().is_empty() {
                            arena.add_text(node, body[..i].to_string());
                        }
                        let after = &body[i..];
                        pos += i + after.find('>').map(|j| j + 1).unwrap_or(after.len());
                    }
                    None => {
                        if !body.trim().is_empty() {
                            arena.add_text(node, body.to_string());
                        }
                        pos = len;
                    }
                }
            } else if !self_closing && !VOID_TAGS.contains(&tag.as_str()) {
                stack.push(node);
            }
        } else {
            let next = rest[1..].find('<').map(|i| i + 1).unwrap_or(rest.len());
            let text = decode_entities(&rest[..next]);
            if !text.trim().is_empty() {
                arena.add_text(*stack.last().expect("stack non-empty"), text);
            }
            pos += next;
        }
    }
}

fn close_tag(arena: &Arena, stack: &mut Vec<usize>, name: &str) {
    if name.is_empty() {
        return;
    }
    // Index 0 is the fragment parent and is never closable.
    let found = stack
        .iter()
        .skip(1)
        .rposition(|&id| arena.node(id).tag == name)
        .map(|i| i + 1);
    if let Some(at) = found {
        stack.truncate(at);
    }
}

/// Returns (tag, attrs, self_closing, bytes consumed).
fn parse_open_tag(rest: &str) -> (String, Vec<(String, String)>, bool, usize) {
    let bytes = rest.as_bytes();
    let mut i = 1;
    while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'-') {
        i += 1;
    }
    let tag = rest[1..i].to_ascii_lowercase();
    let mut attrs = Vec::new();
    let mut self_closing = false;

    loop {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i >= bytes.len() {
            break;
        }
        match bytes[i] {
            b'>' => {
                i += 1;
                break;
            }
            b'/' => {
                self_closing = true;
                i += 1;
            }
            _ => {
                let name_start = i;
                while i < bytes.len()
                    && !bytes[i].is_ascii_whitespace()
                    && !matches!(bytes[i], b'=' | b'>' | b'/')
                {
                    i += 1;
                }
                let name = rest[name_start..i].to_ascii_lowercase();
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                let mut value = String::new();
                if i < bytes.len() && bytes[i] == b'=' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                        i += 1;
                    }
                    if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                        let quote = bytes[i];
                        i += 1;
                        let val_start = i;
                        while i < bytes.len() && bytes[i] != quote {
                            i += 1;
                        }
                        value = decode_entities(&rest[val_start..i]);
                        i = (i + 1).min(bytes.len());
                    } else {
                        let val_start = i;
                        while i < bytes.len()
                            && !bytes[i].is_ascii_whitespace()
                            && bytes[i] != b'>'
                        {
                            i += 1;
                        }
                        value = decode_entities(&rest[val_start..i]);
                    }
                }
                if !name.is_empty() {
                    attrs.push((name, value));
                }
            }
        }
    }
    (tag, attrs, self_closing, i)
}

/// Decodes the named entities the fixtures use plus numeric references.
pub fn decode_entities(text: &str) -> String {
    if !text.contains('&') {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let tail = &rest[amp..];
        let semi = tail.find(';').filter(|&i| i <= 10);
        match semi {
            Some(end) => {
                let name = &tail[1..end];
                let decoded = match name {
                    "amp" => Some('&'),
                    "lt" => Some('<'),
                    "gt" => Some('>'),
                    "quot" => Some('"'),
                    "apos" => Some('\''),
                    "nbsp" => Some(' '),
                    _ => name
                        .strip_prefix("#x")
                        .or_else(|| name.strip_prefix("#X"))
                        .and_then(|h| u32::from_str_radix(h, 16).ok())
                        .or_else(|| name.strip_prefix('#').and_then(|d| d.parse().ok()))
                        .and_then(char::from_u32),
                };
                match decoded {
                    Some(c) => {
                        out.push(c);
                        rest = &tail[end + 1..];
                    }
                    None => {
                        out.push('&');
                        rest = &tail[1..];
                    }
                }
            }
            None => {
                out.push('&');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Escapes text for safe insertion into a fragment.
pub fn escape_html(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::Content;

    fn shape(arena: &Arena, id: usize) -> String {
        let node = arena.node(id);
        let kids: Vec<String> = node
            .children
            .iter()
            .filter_map(|c| match c {
                Content::Node(k) => Some(shape(arena, *k)),
                Content::Text(t) => {
                    let t = t.trim();
                    (!t.is_empty()).then(|| format!("{t:?}"))
                }
            })
            .collect();
        if kids.is_empty() {
            node.tag.clone()
        } else {
            format!("{}({})", node.tag, kids.join(" "))
        }
    }

    fn doc_shape(html: &str) -> String {
        let arena = parse_html(html);
        shape(&arena, arena.root())
    }

    #[test]
    fn nested_structure() {
        assert_eq!(
            doc_shape("<html><body><div><p>hi</p></div></body></html>"),
            "#document(html(body(div(p(\"hi\")))))"
        );
    }

    #[test]
    fn attributes_parse() {
        let arena = parse_html("<div id=\"a\" class='b c' hidden data-x=1>t</div>");
        let div = arena.element_children(arena.root())[0];
        let node = arena.node(div);
        assert_eq!(
            node.attrs,
            vec![
                ("id".to_string(), "a".to_string()),
                ("class".to_string(), "b c".to_string()),
                ("hidden".to_string(), String::new()),
                ("data-x".to_string(), "1".to_string()),
            ]
        );
    }

    #[test]
    fn entities_decode() {
        assert_eq!(decode_entities("a &amp; b &lt;c&gt; &#65;&#x42;"), "a & b <c> AB");
        assert_eq!(decode_entities("5 &malformed no semi"), "5 &malformed no semi");
    }

    #[test]
    fn void_and_self_closing() {
        assert_eq!(
            doc_shape("<div><input><br><img src=\"x\"/><p>t</p></div>"),
            "#document(div(input br img p(\"t\")))"
        );
    }

    #[test]
    fn comments_and_doctype_skipped() {
        assert_eq!(
            doc_shape("<!DOCTYPE html><!-- note --><p>a</p>"),
            "#document(p(\"a\"))"
        );
    }

    #[test]
    fn script_body_is_raw_text() {
        assert_eq!(
            doc_shape("<script>if (a < b) { x(); }</script><p>t</p>"),
            "#document(script(\"if (a < b) { x(); }\") p(\"t\"))"
        );
    }

    // Hand-broken documents covering the recovery rules; the expected shape
    // is the frozen oracle.
    #[test]
    fn recovery_oracle() {
        let cases: [(&str, &str); 20] = [
            ("<div><p>a</div>", "#document(div(p(\"a\")))"),
            ("<div><p>a", "#document(div(p(\"a\")))"),
            ("<p>a</b>", "#document(p(\"a\"))"),
            ("</p><div>a</div>", "#document(div(\"a\"))"),
            ("<ul><li>a<li>b</ul>", "#document(ul(li(\"a\" li(\"b\"))))"),
            ("<div><span>a</div>b", "#document(div(span(\"a\")) \"b\")"),
            ("<b><i>x</b></i>", "#document(b(i(\"x\")))"),
            ("<div><div><p>t</div></div>", "#document(div(div(p(\"t\"))))"),
            ("<p>a<p>b", "#document(p(\"a\" p(\"b\")))"),
            ("<div", "#document(div)"),
            ("<div ><p>a</p>", "#document(div(p(\"a\")))"),
            ("text only", "#document(\"text only\")"),
            ("<div class=>a</div>", "#document(div(\"a\"))"),
            ("<div class>a</div>", "#document(div(\"a\"))"),
            ("<DIV><P>a</P></DIV>", "#document(div(p(\"a\")))"),
            ("<div/>after", "#document(div \"after\")"),
            ("<script>broken", "#document(script(\"broken\"))"),
            ("<style>.a{color:red}", "#document(style(\".a{color:red}\"))"),
            ("a < b", "#document(\"a\" \"< b\")"),
            ("<div><button>x</button", "#document(div(button(\"x\")))"),
        ];
        for (input, expect) in cases {
            assert_eq!(doc_shape(input), expect, "input: {input}");
        }
    }
}
