//! The ten stock widget templates. Each builder emits a markup section plus
//! the structural predictions its manifest freezes: which sequences the
//! enumeration policy will run, how each one classifies, and which tasks the
//! page promises are completable end to end.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dom::escape_html;
use crate::dsl::ActionKind;
use crate::graph::Classification;

use super::WidgetKind;

/// One action of a planned sequence or task, named by element label so it
/// can be resolved to a signature once the page is assembled.
#[derive(Debug, Clone)]
pub(crate) struct PlannedStep {
    pub kind: ActionKind,
    pub label: String,
    pub option: Option<String>,
}

impl PlannedStep {
    fn click(label: &str) -> Self {
        PlannedStep {
            kind: ActionKind::Click,
            label: label.to_string(),
            option: None,
        }
    }

    fn enter(label: &str) -> Self {
        PlannedStep {
            kind: ActionKind::Enter,
            label: label.to_string(),
            option: None,
        }
    }

    fn select(label: &str, option: &str) -> Self {
        PlannedStep {
            kind: ActionKind::Select,
            label: label.to_string(),
            option: Some(option.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct PlannedTransition {
    pub steps: Vec<PlannedStep>,
    pub category: Classification,
    /// Labels of controls that first become visible after this sequence.
    pub new_elements: Vec<String>,
}

impl PlannedTransition {
    fn terminal(steps: Vec<PlannedStep>) -> Self {
        PlannedTransition {
            steps,
            category: Classification::UsableTerminal,
            new_elements: Vec::new(),
        }
    }

    fn inert(steps: Vec<PlannedStep>) -> Self {
        PlannedTransition {
            steps,
            category: Classification::NonInteractive,
            new_elements: Vec::new(),
        }
    }

    fn expand(steps: Vec<PlannedStep>, new_elements: &[&str]) -> Self {
        PlannedTransition {
            steps,
            category: Classification::UsableExpand,
            new_elements: new_elements.iter().map(|l| l.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct WidgetBlueprint {
    pub html: String,
    pub transitions: Vec<PlannedTransition>,
    /// Step recipes for the tasks the fixture promises are completable.
    pub tasks: Vec<Vec<PlannedStep>>,
}

pub(crate) fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.random_range(0..pool.len())]
}

fn pick_distinct<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut indices: Vec<usize> = (0..pool.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    indices[..n].iter().map(|&i| pool[i]).collect()
}

pub(crate) fn build(kind: WidgetKind, rng: &mut ChaCha8Rng, instance: usize) -> WidgetBlueprint {
    let wrapper = format!("{}-{instance}", kind.id());
    match kind {
        WidgetKind::Counter => counter(rng, &wrapper),
        WidgetKind::Tabs => tabs(rng, &wrapper),
        WidgetKind::ModalForm => modal_form(rng, &wrapper),
        WidgetKind::DropdownFilter => dropdown_filter(rng, &wrapper),
        WidgetKind::SearchableList => searchable_list(rng, &wrapper),
        WidgetKind::TodoList => todo_list(rng, &wrapper),
        WidgetKind::Accordion => accordion(rng, &wrapper),
        WidgetKind::Pagination => pagination(rng, &wrapper),
        WidgetKind::LoginForm => login_form(rng, &wrapper),
        WidgetKind::TogglePanel => toggle_panel(rng, &wrapper),
    }
}

/// Both buttons rewrite the count display in place. The count starts above
/// zero so the reset is a real change from the initial page.
fn counter(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let inc = pick(rng, &["Increment", "Add One", "Count Up", "Step Up"]);
    let reset = pick(rng, &["Reset", "Clear", "Start Over"]);
    let start = rng.random_range(2..=9);
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <p id=\"{w}-display\" data-count=\"{n}\">Count: {n}</p>\n",
            "  <button data-action=\"increment\" data-target=\"{w}-display\">{inc}</button>\n",
            "  <button data-action=\"reset-count\" data-target=\"{w}-display\">{reset}</button>\n",
            "</div>",
        ),
        w = w,
        n = start,
        inc = inc,
        reset = reset,
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::terminal(vec![PlannedStep::click(inc)]),
            PlannedTransition::terminal(vec![PlannedStep::click(reset)]),
        ],
        tasks: vec![
            vec![PlannedStep::click(inc)],
            vec![PlannedStep::click(reset)],
        ],
    }
}

/// Re-activating the visible tab is a no-op, so the first tab's button is
/// the corpus's stock example of a non-interactive control.
fn tabs(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let labels = pick_distinct(
        rng,
        &["Overview", "Details", "Settings", "History", "Reviews"],
        3,
    );
    let bodies = pick_distinct(
        rng,
        &[
            "Everything at a glance.",
            "The long-form description.",
            "Knobs and preferences.",
            "What happened earlier.",
            "What people say.",
        ],
        3,
    );
    let mut html = format!("<div id=\"{w}\">\n");
    for (i, label) in labels.iter().enumerate() {
        html.push_str(&format!(
            "  <button data-action=\"show\" data-target=\"{w}-panel-{p}\" data-group=\"{w}-panels\">{l}</button>\n",
            p = i + 1,
            l = escape_html(label),
        ));
    }
    for (i, body) in bodies.iter().enumerate() {
        html.push_str(&format!(
            "  <div id=\"{w}-panel-{p}\" data-group=\"{w}-panels\"{hidden}><p>{b}</p></div>\n",
            p = i + 1,
            hidden = if i == 0 { "" } else { " hidden" },
            b = escape_html(body),
        ));
    }
    html.push_str("</div>");
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::inert(vec![PlannedStep::click(labels[0])]),
            PlannedTransition::terminal(vec![PlannedStep::click(labels[1])]),
            PlannedTransition::terminal(vec![PlannedStep::click(labels[2])]),
        ],
        tasks: vec![
            vec![PlannedStep::click(labels[1])],
            vec![PlannedStep::click(labels[2])],
        ],
    }
}

/// Opening reveals the form, so the open click expands; saving appends a
/// plain row and closes the dialog again.
fn modal_form(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let open = pick(rng, &["New Entry", "Add Note", "New Record"]);
    let field = pick(rng, &["Entry text", "Note text", "Record title"]);
    let save = pick(rng, &["Save", "Confirm", "Keep"]);
    let cancel = pick(rng, &["Cancel", "Dismiss", "Back"]);
    let existing = pick(
        rng,
        &["Standing meeting", "Quarterly review", "Launch checklist"],
    );
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <button data-action=\"open\" data-target=\"{w}-modal\">{open}</button>\n",
            "  <div id=\"{w}-modal\" hidden>\n",
            "    <input id=\"{w}-field\" placeholder=\"{field}\">\n",
            "    <button data-action=\"save-entry\" data-input=\"{w}-field\" ",
            "data-target=\"{w}-entries\" data-modal=\"{w}-modal\">{save}</button>\n",
            "    <button data-action=\"close\" data-target=\"{w}-modal\">{cancel}</button>\n",
            "  </div>\n",
            "  <ul id=\"{w}-entries\"><li>{existing}</li></ul>\n",
            "</div>",
        ),
        w = w,
        open = open,
        field = field,
        save = save,
        cancel = cancel,
        existing = escape_html(existing),
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::expand(vec![PlannedStep::click(open)], &[field, save, cancel]),
            PlannedTransition::terminal(vec![
                PlannedStep::enter(field),
                PlannedStep::click(save),
            ]),
            PlannedTransition::terminal(vec![PlannedStep::click(cancel)]),
        ],
        tasks: vec![
            vec![PlannedStep::click(open)],
            vec![
                PlannedStep::click(open),
                PlannedStep::enter(field),
                PlannedStep::click(save),
            ],
        ],
    }
}

/// Two dropdowns: one filters the list rows, one restyles the section. The
/// enumeration picks the first option that is not already selected, which is
/// the first category for the filter and the second theme for the styler.
fn dropdown_filter(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let categories: [(&str, &str, &[&str]); 3] = [
        ("fruit", "Fruit", &["Apple", "Banana", "Cherry"]),
        ("veg", "Vegetable", &["Carrot", "Leek", "Kale"]),
        ("grain", "Grain", &["Oat bread", "Brown rice", "Barley"]),
    ];
    let first = rng.random_range(0..categories.len());
    let second = (first + 1 + rng.random_range(0..categories.len() - 1)) % categories.len();
    let (value_a, label_a, items_a) = categories[first];
    let (value_b, label_b, items_b) = categories[second];
    let filter = pick(rng, &["Category", "Filter", "Type"]);
    let theme = pick(rng, &["Theme", "Appearance"]);
    let mut rows = String::new();
    for item in pick_distinct(rng, items_a, 2) {
        rows.push_str(&format!(
            "    <li data-category=\"{value_a}\">{}</li>\n",
            escape_html(item)
        ));
    }
    rows.push_str(&format!(
        "    <li data-category=\"{value_b}\">{}</li>\n",
        escape_html(pick(rng, items_b))
    ));
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <select data-action=\"filter-select\" data-target=\"{w}-items\" aria-label=\"{filter}\">\n",
            "    <option value=\"all\" selected>All</option>\n",
            "    <option value=\"{va}\">{la}</option>\n",
            "    <option value=\"{vb}\">{lb}</option>\n",
            "  </select>\n",
            "  <select data-action=\"set-theme\" data-target=\"{w}\" aria-label=\"{theme}\">\n",
            "    <option selected>Light</option>\n",
            "    <option>Dark</option>\n",
            "    <option>Sepia</option>\n",
            "  </select>\n",
            "  <ul id=\"{w}-items\">\n{rows}",
            "  </ul>\n",
            "</div>",
        ),
        w = w,
        filter = filter,
        theme = theme,
        va = value_a,
        la = label_a,
        vb = value_b,
        lb = label_b,
        rows = rows,
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::terminal(vec![PlannedStep::select(filter, label_a)]),
            PlannedTransition::terminal(vec![PlannedStep::select(theme, "Dark")]),
        ],
        tasks: vec![
            vec![PlannedStep::select(filter, label_a)],
            vec![PlannedStep::select(theme, "Dark")],
        ],
    }
}

/// The query box and its button live in one labeled region, so the
/// enumeration types and submits as a single composed sequence.
fn searchable_list(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let field = pick(rng, &["Search query", "Find items", "Search text"]);
    let button = pick(rng, &["Search", "Go", "Find"]);
    let items = pick_distinct(
        rng,
        &["Milk", "Bread", "Eggs", "Butter", "Honey", "Apples"],
        3,
    );
    let rows: String = items
        .iter()
        .map(|i| format!("    <li>{}</li>\n", escape_html(i)))
        .collect();
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <input id=\"{w}-box\" placeholder=\"{field}\">\n",
            "  <button data-action=\"search\" data-input=\"{w}-box\" ",
            "data-target=\"{w}-items\" data-result=\"{w}-note\">{button}</button>\n",
            "  <p id=\"{w}-note\">Type a query to filter the list.</p>\n",
            "  <ul id=\"{w}-items\">\n{rows}",
            "  </ul>\n",
            "</div>",
        ),
        w = w,
        field = field,
        button = button,
        rows = rows,
    );
    WidgetBlueprint {
        html,
        transitions: vec![PlannedTransition::terminal(vec![
            PlannedStep::enter(field),
            PlannedStep::click(button),
        ])],
        tasks: vec![vec![PlannedStep::enter(field), PlannedStep::click(button)]],
    }
}

/// Delete rows keep the stock "Delete" label because added rows are minted
/// by the page runtime with that exact label; a seeded variant would make
/// freshly added rows look like newly revealed controls.
fn todo_list(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let field = pick(rng, &["New task", "Task name", "Next item"]);
    let add = pick(rng, &["Add", "Add Task", "Append"]);
    let items = pick_distinct(
        rng,
        &[
            "Water the plants",
            "File the report",
            "Book flights",
            "Fix the gate",
        ],
        2,
    );
    let rows: String = items
        .iter()
        .map(|i| {
            format!(
                "    <li><span>{}</span> <button data-action=\"remove-item\">Delete</button></li>\n",
                escape_html(i)
            )
        })
        .collect();
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <input id=\"{w}-field\" placeholder=\"{field}\">\n",
            "  <button data-action=\"add-item\" data-input=\"{w}-field\" data-target=\"{w}-items\">{add}</button>\n",
            "  <ul id=\"{w}-items\">\n{rows}",
            "  </ul>\n",
            "</div>",
        ),
        w = w,
        field = field,
        add = add,
        rows = rows,
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::terminal(vec![
                PlannedStep::enter(field),
                PlannedStep::click(add),
            ]),
            PlannedTransition::terminal(vec![PlannedStep::click("Delete")]),
        ],
        tasks: vec![
            vec![PlannedStep::enter(field), PlannedStep::click(add)],
            vec![PlannedStep::click("Delete")],
        ],
    }
}

/// Independent sections; each header click reveals a text-only body, so
/// every toggle is a terminal change.
fn accordion(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let titles = pick_distinct(
        rng,
        &["Shipping", "Returns", "Warranty", "Payment options"],
        3,
    );
    let bodies = pick_distinct(
        rng,
        &[
            "Orders leave the warehouse within two days.",
            "Thirty days, no questions asked.",
            "Two years on every part.",
            "Cards, transfers, and invoices.",
        ],
        3,
    );
    let mut html = format!("<div id=\"{w}\">\n");
    for (i, (title, body)) in titles.iter().zip(&bodies).enumerate() {
        html.push_str(&format!(
            concat!(
                "  <button data-action=\"toggle\" data-target=\"{w}-sec-{p}\">{t}</button>\n",
                "  <div id=\"{w}-sec-{p}\" hidden><p>{b}</p></div>\n",
            ),
            w = w,
            p = i + 1,
            t = escape_html(title),
            b = escape_html(body),
        ));
    }
    html.push_str("</div>");
    WidgetBlueprint {
        html,
        transitions: titles
            .iter()
            .map(|t| PlannedTransition::terminal(vec![PlannedStep::click(t)]))
            .collect(),
        tasks: titles
            .iter()
            .map(|t| vec![PlannedStep::click(t)])
            .collect(),
    }
}

/// Starting on the first page makes the previous-button click a clamped
/// no-op and the next-button click a real page turn.
fn pagination(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let prev = pick(rng, &["Previous", "Back"]);
    let next = pick(rng, &["Next", "Forward"]);
    let pages = pick_distinct(
        rng,
        &[
            "Alpha section",
            "Beta section",
            "Gamma section",
            "Delta section",
        ],
        3,
    );
    let mut html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <button data-action=\"page-prev\" data-group=\"{w}-pages\" data-indicator=\"{w}-note\">{prev}</button>\n",
            "  <button data-action=\"page-next\" data-group=\"{w}-pages\" data-indicator=\"{w}-note\">{next}</button>\n",
            "  <p id=\"{w}-note\">Page 1 of 3</p>\n",
        ),
        w = w,
        prev = prev,
        next = next,
    );
    for (i, page) in pages.iter().enumerate() {
        html.push_str(&format!(
            "  <div data-group=\"{w}-pages\"{hidden}><p>{p}</p></div>\n",
            hidden = if i == 0 { "" } else { " hidden" },
            p = escape_html(page),
        ));
    }
    html.push_str("</div>");
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::inert(vec![PlannedStep::click(prev)]),
            PlannedTransition::terminal(vec![PlannedStep::click(next)]),
        ],
        tasks: vec![vec![PlannedStep::click(next)]],
    }
}

/// Signing in swaps the form for the account panel, revealing the sign-out
/// control; signing out lands back on the initial page, which is why both
/// sequences expand rather than terminate.
fn login_form(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let user = pick(rng, &["Username", "Account name"]);
    let pass = pick(rng, &["Password", "Passphrase"]);
    let login = pick(rng, &["Log In", "Sign In"]);
    let logout = pick(rng, &["Log Out", "Sign Out"]);
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <div id=\"{w}-form\">\n",
            "    <input name=\"username\" placeholder=\"{user}\">\n",
            "    <input name=\"password\" placeholder=\"{pass}\">\n",
            "    <button data-action=\"login\" data-form=\"{w}-form\" ",
            "data-target=\"{w}-panel\" data-result=\"{w}-note\">{login}</button>\n",
            "    <p id=\"{w}-note\"></p>\n",
            "  </div>\n",
            "  <div id=\"{w}-panel\" hidden>\n",
            "    <p data-welcome=\"\">Signed in.</p>\n",
            "    <button data-action=\"logout\" data-form=\"{w}-form\" data-target=\"{w}-panel\">{logout}</button>\n",
            "  </div>\n",
            "</div>",
        ),
        w = w,
        user = user,
        pass = pass,
        login = login,
        logout = logout,
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::expand(
                vec![
                    PlannedStep::enter(user),
                    PlannedStep::enter(pass),
                    PlannedStep::click(login),
                ],
                &[logout],
            ),
            PlannedTransition::expand(vec![PlannedStep::click(logout)], &[user, pass, login]),
        ],
        tasks: vec![vec![
            PlannedStep::enter(user),
            PlannedStep::enter(pass),
            PlannedStep::click(login),
        ]],
    }
}

/// One control reveals a panel that carries its own dismiss button; closing
/// it lands back on the initial page.
fn toggle_panel(rng: &mut ChaCha8Rng, w: &str) -> WidgetBlueprint {
    let toggle = pick(rng, &["Options", "Advanced settings", "More details"]);
    let close = pick(rng, &["Close", "Hide panel"]);
    let body = pick(
        rng,
        &[
            "Threshold tuning and export paths.",
            "Extra knobs for power users.",
            "Nothing dangerous in here.",
        ],
    );
    let html = format!(
        concat!(
            "<div id=\"{w}\">\n",
            "  <button data-action=\"toggle\" data-target=\"{w}-body\">{toggle}</button>\n",
            "  <div id=\"{w}-body\" hidden>\n",
            "    <p>{body}</p>\n",
            "    <button data-action=\"close\" data-target=\"{w}-body\">{close}</button>\n",
            "  </div>\n",
            "</div>",
        ),
        w = w,
        toggle = toggle,
        close = close,
        body = escape_html(body),
    );
    WidgetBlueprint {
        html,
        transitions: vec![
            PlannedTransition::expand(vec![PlannedStep::click(toggle)], &[close]),
            PlannedTransition::terminal(vec![PlannedStep::click(close)]),
        ],
        tasks: vec![vec![PlannedStep::click(toggle)]],
    }
}
