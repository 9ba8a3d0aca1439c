//! Deterministic in-process backend. Pages declare widget behaviors through
//! `data-action` attributes; dispatch mutates the arena directly, no script
//! engine involved.
//!
//! Click behaviors: `increment`, `reset-count`, `toggle`, `open`, `close`,
//! `show`, `page-next`/`page-prev`, `search`, `login`, `logout`, `add-item`,
//! `remove-item`, `save-entry`, `set-text`, `submit-echo`. Select behaviors:
//! `filter-select`, `set-theme`. An element with `data-broken` swallows every
//! event, modeling a control whose wiring is missing.

use crate::dom::{escape_html, parse_fragment_into, parse_html, xpath, Arena, DomNode};
use crate::dsl::Action;

use super::{Backend, BackendKind, EnvError, PageSource};

pub struct SimulatorBackend {
    arena: Arena,
}

impl Default for SimulatorBackend {
    fn default() -> Self {
        Self::new()
    }
}

impl SimulatorBackend {
    pub fn new() -> Self {
        SimulatorBackend {
            arena: Arena::new(),
        }
    }

    fn fail(msg: impl Into<String>) -> EnvError {
        EnvError::ExecutionFailure(msg.into())
    }

    /// Maps an annotated node back onto the live arena.
    fn resolve(&self, target: &DomNode) -> Result<usize, EnvError> {
        let direct = target.source_id;
        if self
            .arena
            .try_node(direct)
            .is_some_and(|n| n.tag == target.tag)
        {
            return Ok(direct);
        }
        xpath::evaluate(&self.arena, &target.xpath)
            .filter(|&id| self.arena.node(id).tag == target.tag)
            .ok_or_else(|| Self::fail(format!("stale target {}", target.xpath)))
    }

    fn element_by_id_attr(&self, name: &str) -> Result<usize, EnvError> {
        self.arena
            .find_by_attr("id", name)
            .ok_or_else(|| Self::fail(format!("no element with id {name:?}")))
    }

    fn attr_of(&self, id: usize, name: &str) -> Result<String, EnvError> {
        self.arena
            .attr(id, name)
            .map(str::to_string)
            .ok_or_else(|| Self::fail(format!("behavior element is missing {name}")))
    }

    fn target_of(&self, id: usize) -> Result<usize, EnvError> {
        let tid = self.attr_of(id, "data-target")?;
        self.element_by_id_attr(&tid)
    }

    fn set_hidden(&mut self, id: usize, hidden: bool) {
        if hidden {
            self.arena.set_attr(id, "hidden", "");
        } else {
            self.arena.remove_attr(id, "hidden");
        }
    }

    /// Panels of a group carry `data-group`; so do the controls that switch
    /// between them, which is why members exclude anything with `data-action`.
    fn group_members(&self, group: &str) -> Vec<usize> {
        self.arena
            .descendants(self.arena.root())
            .into_iter()
            .filter(|&id| self.arena.attr(id, "data-group") == Some(group))
            .filter(|&id| !self.arena.has_attr(id, "data-action"))
            .collect()
    }

    fn click(&mut self, id: usize) -> Result<(), EnvError> {
        let Some(behavior) = self.arena.attr(id, "data-action").map(str::to_string) else {
            return Ok(());
        };
        match behavior.as_str() {
            "increment" => {
                let display = self.target_of(id)?;
                let count: i64 = self
                    .arena
                    .attr(display, "data-count")
                    .and_then(|v| v.parse().ok())
                    .unwrap_or(0)
                    + 1;
                self.arena.set_attr(display, "data-count", &count.to_string());
                self.arena.set_text(display, &format!("Count: {count}"));
            }
            "reset-count" => {
                let display = self.target_of(id)?;
                self.arena.set_attr(display, "data-count", "0");
                self.arena.set_text(display, "Count: 0");
                if let Ok(note_id) = self.attr_of(id, "data-note") {
                    let note = self.element_by_id_attr(&note_id)?;
                    self.arena.set_text(note, "Counter was reset");
                }
            }
            "toggle" => {
                let target = self.target_of(id)?;
                let hidden = self.arena.has_attr(target, "hidden");
                self.set_hidden(target, !hidden);
            }
            "open" => {
                let target = self.target_of(id)?;
                self.set_hidden(target, false);
            }
            "close" => {
                let target = self.target_of(id)?;
                self.set_hidden(target, true);
            }
            "show" => {
                let group = self.attr_of(id, "data-group")?;
                let target = self.target_of(id)?;
                for member in self.group_members(&group) {
                    self.set_hidden(member, true);
                }
                self.set_hidden(target, false);
            }
            "page-next" | "page-prev" => {
                let delta: i64 = if behavior == "page-next" { 1 } else { -1 };
                self.page_nav(id, delta)?;
            }
            "search" => self.search(id)?,
            "login" => self.login(id)?,
            "logout" => {
                let form = self.attr_of(id, "data-form")?;
                let form = self.element_by_id_attr(&form)?;
                let panel = self.target_of(id)?;
                self.set_hidden(form, false);
                self.set_hidden(panel, true);
            }
            "add-item" => self.add_item(id, false)?,
            "save-entry" => self.add_item(id, true)?,
            "remove-item" => {
                let item = self
                    .arena
                    .closest_tag(id, "li")
                    .ok_or_else(|| Self::fail("remove-item outside a list item"))?;
                self.arena.remove_node(item);
            }
            "set-text" => {
                let target = self.target_of(id)?;
                let text = self.attr_of(id, "data-text")?;
                self.arena.set_text(target, &text);
            }
            "submit-echo" => {
                let form = self.attr_of(id, "data-form")?;
                let form = self.element_by_id_attr(&form)?;
                let values: Vec<String> = self
                    .arena
                    .descendants(form)
                    .into_iter()
                    .filter(|&f| {
                        matches!(self.arena.node(f).tag.as_str(), "input" | "textarea" | "select")
                    })
                    .filter_map(|f| self.arena.attr(f, "value"))
                    .filter(|v| !v.is_empty())
                    .map(str::to_string)
                    .collect();
                let result = self.attr_of(id, "data-result")?;
                let result = self.element_by_id_attr(&result)?;
                self.arena
                    .set_text(result, &format!("Submitted: {}", values.join("; ")));
            }
            other => return Err(Self::fail(format!("unknown behavior {other:?}"))),
        }
        Ok(())
    }

    fn page_nav(&mut self, id: usize, delta: i64) -> Result<(), EnvError> {
        let group = self.attr_of(id, "data-group")?;
        let pages = self.group_members(&group);
        if pages.is_empty() {
            return Err(Self::fail(format!("no pages in group {group:?}")));
        }
        let current = pages
            .iter()
            .position(|&p| !self.arena.has_attr(p, "hidden"))
            .unwrap_or(0);
        let next = (current as i64 + delta).clamp(0, pages.len() as i64 - 1) as usize;
        if next == current {
            return Ok(());
        }
        for &page in &pages {
            self.set_hidden(page, true);
        }
        self.set_hidden(pages[next], false);
        if let Ok(indicator) = self.attr_of(id, "data-indicator") {
            let indicator = self.element_by_id_attr(&indicator)?;
            self.arena
                .set_text(indicator, &format!("Page {} of {}", next + 1, pages.len()));
        }
        Ok(())
    }

    fn search(&mut self, id: usize) -> Result<(), EnvError> {
        let input = self.attr_of(id, "data-input")?;
        let input = self.element_by_id_attr(&input)?;
        let query = self.arena.attr(input, "value").unwrap_or("").to_string();
        let needle = query.to_lowercase();
        let list = self.target_of(id)?;
        let mut shown = 0;
        for item in self.arena.element_children(list) {
            if self.arena.node(item).tag != "li" {
                continue;
            }
            let visible = self
                .arena
                .subtree_text(item)
                .to_lowercase()
                .contains(&needle);
            self.set_hidden(item, !visible);
            shown += usize::from(visible);
        }
        let result = self.attr_of(id, "data-result")?;
        let result = self.element_by_id_attr(&result)?;
        self.arena
            .set_text(result, &format!("Results for '{query}': {shown}"));
        Ok(())
    }

    fn login(&mut self, id: usize) -> Result<(), EnvError> {
        let form = self.attr_of(id, "data-form")?;
        let form = self.element_by_id_attr(&form)?;
        let field = |name: &str| {
            self.arena
                .descendants(form)
                .into_iter()
                .find(|&f| self.arena.attr(f, "name") == Some(name))
                .and_then(|f| self.arena.attr(f, "value"))
                .unwrap_or("")
                .to_string()
        };
        let username = field("username");
        let password = field("password");
        if username.is_empty() || password.is_empty() {
            let result = self.attr_of(id, "data-result")?;
            let result = self.element_by_id_attr(&result)?;
            self.arena.set_text(result, "Enter username and password");
            return Ok(());
        }
        let panel = self.target_of(id)?;
        self.set_hidden(form, true);
        self.set_hidden(panel, false);
        if let Some(welcome) = self
            .arena
            .descendants(panel)
            .into_iter()
            .find(|&w| self.arena.has_attr(w, "data-welcome"))
        {
            self.arena
                .set_text(welcome, &format!("Welcome, {username}!"));
        }
        Ok(())
    }

    fn add_item(&mut self, id: usize, close_modal: bool) -> Result<(), EnvError> {
        let input = self.attr_of(id, "data-input")?;
        let input = self.element_by_id_attr(&input)?;
        let text = self.arena.attr(input, "value").unwrap_or("").to_string();
        if text.is_empty() {
            return Ok(());
        }
        let list = self.target_of(id)?;
        let escaped = escape_html(&text);
        let fragment = if close_modal {
            format!("<li>{escaped}</li>")
        } else {
            format!(
                "<li><span>{escaped}</span> <button data-action=\"remove-item\">Delete</button></li>"
            )
        };
        parse_fragment_into(&mut self.arena, list, &fragment);
        self.arena.remove_attr(input, "value");
        if close_modal {
            let modal = self.attr_of(id, "data-modal")?;
            let modal = self.element_by_id_attr(&modal)?;
            self.set_hidden(modal, true);
        }
        Ok(())
    }

    fn enter(&mut self, id: usize, text: &str) -> Result<(), EnvError> {
        match self.arena.node(id).tag.as_str() {
            "input" | "textarea" => {
                self.arena.set_attr(id, "value", text);
                Ok(())
            }
            tag => Err(Self::fail(format!("cannot type into <{tag}>"))),
        }
    }

    fn select(&mut self, id: usize, label: &str) -> Result<(), EnvError> {
        if self.arena.node(id).tag != "select" {
            return Err(Self::fail(format!(
                "cannot select an option of <{}>",
                self.arena.node(id).tag
            )));
        }
        let options: Vec<usize> = self
            .arena
            .element_children(id)
            .into_iter()
            .filter(|&o| self.arena.node(o).tag == "option")
            .collect();
        let wanted = label.trim();
        let chosen = options
            .iter()
            .copied()
            .find(|&o| {
                self.arena.subtree_text(o) == wanted
                    || self.arena.attr(o, "value") == Some(wanted)
            })
            .ok_or_else(|| Self::fail(format!("no option {wanted:?}")))?;
        for &option in &options {
            self.arena.remove_attr(option, "selected");
        }
        self.arena.set_attr(chosen, "selected", "");
        let value = self
            .arena
            .attr(chosen, "value")
            .map(str::to_string)
            .unwrap_or_else(|| self.arena.subtree_text(chosen));
        self.arena.set_attr(id, "value", &value);

        match self.arena.attr(id, "data-action").map(str::to_string) {
            None => Ok(()),
            Some(behavior) => match behavior.as_str() {
                "filter-select" => {
                    let list = self.target_of(id)?;
                    let keep_all = value.eq_ignore_ascii_case("all");
                    for item in self.arena.element_children(list) {
                        if self.arena.node(item).tag != "li" {
                            continue;
                        }
                        let category = self.arena.attr(item, "data-category").unwrap_or("");
                        let visible = keep_all || category.eq_ignore_ascii_case(&value);
                        self.set_hidden(item, !visible);
                    }
                    Ok(())
                }
                "set-theme" => {
                    let target = self.target_of(id)?;
                    self.arena.set_attr(target, "data-theme", &value);
                    Ok(())
                }
                other => Err(Self::fail(format!("unknown select behavior {other:?}"))),
            },
        }
    }
}

impl Backend for SimulatorBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Simulator
    }

    fn navigate(&mut self, source: &PageSource) -> Result<(), EnvError> {
        let html = source.read_html()?;
        self.arena = parse_html(&html);
        Ok(())
    }

    fn arena(&mut self) -> Result<Arena, EnvError> {
        Ok(self.arena.clone())
    }

    fn screenshot(&mut self) -> Result<Option<(Vec<u8>, &'static str)>, EnvError> {
        Ok(None)
    }

    fn dispatch(&mut self, target: &DomNode, action: &Action) -> Result<(), EnvError> {
        let id = self.resolve(target)?;
        if self.arena.has_attr(id, "data-broken") {
            return Ok(());
        }
        match action {
            Action::Click(_) => self.click(id),
            Action::Enter(_, text) => self.enter(id, text),
            Action::Select(_, option) => self.select(id, option),
        }
    }
}
