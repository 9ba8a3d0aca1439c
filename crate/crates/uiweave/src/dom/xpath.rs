//! Evaluator for the positional XPaths annotation produces:
//! `/tag[i]/tag[j]/...`, indices 1-based among same-tag element siblings.

use super::Arena;

/// Resolves an absolute positional path against the arena, returning the
/// matched element id.
pub fn evaluate(arena: &Arena, path: &str) -> Option<usize> {
    let mut current = arena.root();
    for segment in path.split('/').filter(|s| !s.is_empty()) {
        let (tag, position) = parse_segment(segment)?;
        let mut seen = 0;
        let mut matched = None;
        for child in arena.element_children(current) {
            if arena.node(child).tag == tag {
                seen += 1;
                if seen == position {
                    matched = Some(child);
                    break;
                }
            }
        }
        current = matched?;
    }
    (current != arena.root()).then_some(current)
}

fn parse_segment(segment: &str) -> Option<(&str, usize)> {
    match segment.find('[') {
        Some(open) => {
            let close = segment.find(']')?;
            let position = segment[open + 1..close].parse().ok()?;
            Some((&segment[..open], position))
        }
        None => Some((segment, 1)),
    }
}
