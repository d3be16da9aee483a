//! Deterministic simulated web apps with ground truth. Every page is a
//! server-rendered finite-state-machine node; navigation is expressed in
//! ordinary markup (`href`, `onclick`/`ondblclick` location changes, form
//! `action`) pointing at `/s/{state}`, so the same pages work in-process and
//! served over HTTP.

use std::collections::HashSet;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::layout::layout;
use super::{failure_signature, ConsoleEntry, ConsoleLevel};
use crate::actions::Geometry;
use crate::dom::{parse_document, simplify, DomTree, Node};
use crate::error::{Error, Result};
use crate::rng::{stream, RunRng};

/// Origin used for in-process page URLs.
pub const SIM_ORIGIN: &str = "http://fixture.local";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    /// `depth` levels of `branching` buttons, one correct per level.
    DeepChain {
        depth: usize,
        branching: usize,
        /// Wrong buttons return to the start page; otherwise they reload the
        /// current page.
        #[serde(default = "default_true")]
        wrong_resets: bool,
    },
    /// Deep chain whose pages appear with or without a dismissible hint
    /// banner that comes first in document order.
    NearDuplicate { depth: usize, branching: usize },
    /// Three linked pages plus `hidden` detail pages reachable only through
    /// `div` cards (click) and tiles (double-click).
    HiddenAction { hidden: usize },
    /// A hub with `branches` chains of `depth` pages.
    Wide { branches: usize, depth: usize },
    /// Pages that log console errors when visited.
    Failing,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureSpec {
    #[serde(flatten)]
    pub kind: FixtureKind,
    #[serde(default)]
    pub seed: u64,
}

impl FixtureSpec {
    pub fn deep_chain(depth: usize, branching: usize, seed: u64) -> Self {
        Self { kind: FixtureKind::DeepChain { depth, branching, wrong_resets: true }, seed }
    }

    pub fn near_duplicate(depth: usize, branching: usize, seed: u64) -> Self {
        Self { kind: FixtureKind::NearDuplicate { depth, branching }, seed }
    }

    pub fn hidden_action(hidden: usize, seed: u64) -> Self {
        Self { kind: FixtureKind::HiddenAction { hidden }, seed }
    }

    pub fn wide(branches: usize, depth: usize, seed: u64) -> Self {
        Self { kind: FixtureKind::Wide { branches, depth }, seed }
    }

    pub fn failing(seed: u64) -> Self {
        Self { kind: FixtureKind::Failing, seed }
    }
}

/// What the fixture knows about itself.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub state_count: usize,
    /// Exact-state hash of each state, indexed by state id.
    pub state_hashes: Vec<u64>,
    /// Locators of the unique success path (deep chains).
    pub success_path: Vec<String>,
    pub terminal_state: Option<usize>,
    /// (state, locator, label) for elements only the discriminator can find.
    pub hidden_labels: Vec<(usize, String, u8)>,
    pub expected_failures: Vec<String>,
}

impl GroundTruth {
    pub fn state_of(&self, hash: u64) -> Option<usize> {
        self.state_hashes.iter().position(|&h| h == hash)
    }
}

/// One rendered page of a simulated app.
#[derive(Clone, Debug)]
pub struct SimPage {
    pub html: String,
    pub tree: DomTree,
    pub geometry: Geometry,
    pub page_size: (f64, f64),
    pub console: Vec<ConsoleEntry>,
}

#[derive(Clone, Debug)]
pub struct SimApp {
    pub pages: Vec<SimPage>,
    pub start: usize,
}

fn console_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"console\.(error|warn|info|log)\(("(?:[^"\\]|\\.)*")\)"#).unwrap())
}

impl SimApp {
    pub fn from_html(pages: Vec<String>, start: usize) -> Result<Self> {
        if start >= pages.len() {
            return Err(Error::Config("start page out of range".into()));
        }
        let pages = pages
            .into_iter()
            .enumerate()
            .map(|(id, html)| {
                let tree = parse_document(&html);
                let (geometry, page_size) = layout(&tree);
                let console = script_console(&tree, &page_url(SIM_ORIGIN, id));
                SimPage { html, tree, geometry, page_size, console }
            })
            .collect();
        Ok(Self { pages, start })
    }

    pub fn state_hash(&self, id: usize) -> u64 {
        simplify(&self.pages[id].tree).digest()
    }
}

pub fn page_url(origin: &str, id: usize) -> String {
    format!("{origin}/s/{id}")
}

/// Parses `/s/{id}` out of an href or script location assignment.
pub fn target_state(spec: &str) -> Option<usize> {
    let i = spec.find("/s/")?;
    let digits: String = spec[i + 3..].chars().take_while(|c| c.is_ascii_digit()).collect();
    digits.parse().ok()
}

fn script_console(tree: &DomTree, url: &str) -> Vec<ConsoleEntry> {
    let mut out = Vec::new();
    for el in tree.elements().into_iter().filter(|e| e.node.tag == "script") {
        for c in console_re().captures_iter(&el.node.text) {
            let level = match &c[1] {
                "error" => ConsoleLevel::Error,
                "warn" => ConsoleLevel::Warning,
                _ => ConsoleLevel::Info,
            };
            let message: String = serde_json::from_str(&c[2]).unwrap_or_else(|_| c[2].to_string());
            out.push(ConsoleEntry { level, message, source_url: url.to_string() });
        }
    }
    out
}

fn nav(target: usize) -> String {
    format!("location.href='/s/{target}'")
}

fn link(text: &str, target: usize) -> Node {
    Node::new("a").attr("href", format!("/s/{target}")).text(text)
}

fn button(text: &str, target: usize) -> Node {
    Node::new("button").attr("type", "button").attr("onclick", nav(target)).text(text)
}

const WORDS: &[&str] = &[
    "alpha", "budget", "cash", "delta", "entry", "forecast", "goal", "history", "invoice", "journal", "ledger",
    "margin", "note", "owner", "profile", "quota", "record", "summary", "total", "update", "wallet",
];
const PANEL_KEYS: &[&str] = &["data-a", "data-b", "data-c", "data-d", "role", "lang", "title", "data-e"];

fn words(rng: &mut RunRng, n: usize) -> String {
    (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

fn maybe_attr(mut node: Node, rng: &mut RunRng) -> Node {
    if rng.gen_bool(0.5) {
        let key = *PANEL_KEYS.choose(rng).expect("non-empty");
        node.set_attr(key, "x");
    }
    node
}

fn panel_block(rng: &mut RunRng, depth: usize) -> Node {
    let kind = if depth >= 2 { rng.gen_range(0..6) } else { rng.gen_range(0..8) };
    let node = match kind {
        0 => {
            let mut p = Node::new("p").text(words(rng, 4));
            if rng.gen_bool(0.5) {
                p = p.child(Node::new(if rng.gen_bool(0.5) { "em" } else { "strong" }).text(words(rng, 1)));
            }
            p
        }
        1 => Node::new(["h3", "h4", "h5"][rng.gen_range(0..3)]).text(words(rng, 2)),
        2 => {
            let n = rng.gen_range(2..6);
            Node::new("ul").children((0..n).map(|_| Node::new("li").text(words(rng, 2))))
        }
        3 => {
            let rows = rng.gen_range(1..4);
            let cols = rng.gen_range(1..4);
            Node::new("table").children(
                (0..rows).map(|_| Node::new("tr").children((0..cols).map(|_| Node::new("td").text(words(rng, 1))))),
            )
        }
        4 => Node::new("dl").child(Node::new("dt").text(words(rng, 1))).child(Node::new("dd").text(words(rng, 3))),
        5 => Node::new("blockquote").child(Node::new("p").text(words(rng, 5))),
        6 => Node::new("figure").child(Node::new("img").attr("alt", words(rng, 1))).child(Node::new("span").text(words(rng, 2))),
        _ => {
            let n = rng.gen_range(1..4);
            Node::new("div").children((0..n).map(|_| panel_block(rng, depth + 1)).collect::<Vec<_>>())
        }
    };
    maybe_attr(node, rng)
}

/// Static content whose structure is unique to one state.
fn panel(seed: u64, state: usize, salt: u64) -> Node {
    let mut rng = stream(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15), &format!("panel/{state}"));
    let n = rng.gen_range(3..7);
    Node::new("section").attr("class", "panel").children((0..n).map(|_| panel_block(&mut rng, 0)).collect::<Vec<_>>())
}

fn document(title: &str, scripts: &[String], body: Vec<Node>) -> String {
    let mut head = Node::new("head")
        .child(Node::new("meta").attr("charset", "utf-8"))
        .child(Node::new("title").text(title))
        .child(Node::new("link").attr("rel", "stylesheet").attr("href", "/app.css"));
    for s in scripts {
        head = head.child(Node::new("script").text(s.clone()));
    }
    let html = Node::new("html").child(head).child(Node::new("body").children(body));
    format!("<!DOCTYPE html>{}", html.to_html())
}

fn check(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Config(msg.to_string()))
    }
}

struct Built {
    pages: Vec<String>,
    truth: GroundTruth,
}

/// Builds the app and its ground truth. Rejects `depth < 1`, `branching < 2`
/// and `hidden < 1`.
pub fn make_fixture(spec: &FixtureSpec) -> Result<(SimApp, GroundTruth)> {
    match &spec.kind {
        FixtureKind::DeepChain { depth, branching, .. } | FixtureKind::NearDuplicate { depth, branching } => {
            check(*depth >= 1, "depth must be at least 1")?;
            check(*branching >= 2, "branching must be at least 2")?;
        }
        FixtureKind::HiddenAction { hidden } => check(*hidden >= 1, "hidden must be at least 1")?,
        FixtureKind::Wide { branches, depth } => {
            check(*depth >= 1, "depth must be at least 1")?;
            check(*branches >= 2, "branches must be at least 2")?;
        }
        FixtureKind::Failing => {}
    }
    for salt in 0..16u64 {
        let built = match &spec.kind {
            FixtureKind::DeepChain { depth, branching, wrong_resets } => {
                deep_chain(*depth, *branching, *wrong_resets, spec.seed, salt)
            }
            FixtureKind::NearDuplicate { depth, branching } => near_duplicate(*depth, *branching, spec.seed, salt),
            FixtureKind::HiddenAction { hidden } => hidden_action(*hidden, spec.seed, salt),
            FixtureKind::Wide { branches, depth } => wide(*branches, *depth, spec.seed, salt),
            FixtureKind::Failing => failing(spec.seed, salt),
        };
        let app = SimApp::from_html(built.pages, 0)?;
        let hashes: Vec<u64> = (0..app.pages.len()).map(|i| app.state_hash(i)).collect();
        if hashes.iter().collect::<HashSet<_>>().len() == hashes.len() {
            let truth = GroundTruth { state_hashes: hashes, ..built.truth };
            return Ok((app, truth));
        }
    }
    Err(Error::Config("could not generate distinct page structures".into()))
}

fn correct_buttons(depth: usize, branching: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream(seed, "fixture/correct");
    (0..depth).map(|_| rng.gen_range(0..branching)).collect()
}

fn level_body(level: usize, buttons: Vec<Node>, panel: Node) -> Vec<Node> {
    vec![
        Node::new("div").attr("class", "header").child(Node::new("h1").text(format!("Level {level}"))),
        Node::new("div").attr("class", "actions").children(buttons),
        panel,
    ]
}

const ACTIONS_PATH: &str = "/html[1]/body[1]/div[2]";

fn deep_chain(depth: usize, branching: usize, wrong_resets: bool, seed: u64, salt: u64) -> Built {
    let correct = correct_buttons(depth, branching, seed);
    let mut pages = Vec::new();
    for level in 0..=depth {
        let body = if level < depth {
            let buttons = (0..branching)
                .map(|j| {
                    let target = if j == correct[level] {
                        level + 1
                    } else if wrong_resets {
                        0
                    } else {
                        level
                    };
                    button(&format!("Option {}", j + 1), target)
                })
                .collect();
            level_body(level, buttons, panel(seed, level, salt))
        } else {
            vec![
                Node::new("div").attr("class", "header").child(Node::new("h1").text("Done")),
                Node::new("div").attr("class", "actions").child(link("Home", 0)),
                panel(seed, level, salt),
            ]
        };
        pages.push(document(&format!("Level {level}"), &[], body));
    }
    let success_path = correct.iter().map(|&j| format!("{ACTIONS_PATH}/button[{}]", j + 1)).collect();
    Built {
        pages,
        truth: GroundTruth {
            state_count: depth + 1,
            state_hashes: vec![],
            success_path,
            terminal_state: Some(depth),
            hidden_labels: vec![],
            expected_failures: vec![],
        },
    }
}

/// State id for (level, banner shown).
pub fn near_duplicate_state(level: usize, banner: bool) -> usize {
    2 * level + usize::from(banner)
}

fn near_duplicate(depth: usize, branching: usize, seed: u64, salt: u64) -> Built {
    let correct = correct_buttons(depth, branching, seed);
    let mut pages = Vec::new();
    for level in 0..=depth {
        for banner in [false, true] {
            let mut body = if level < depth {
                let buttons = (0..branching)
                    .map(|j| {
                        let target = if j == correct[level] {
                            near_duplicate_state(level + 1, true)
                        } else {
                            near_duplicate_state(0, true)
                        };
                        button(&format!("Option {}", j + 1), target)
                    })
                    .collect();
                level_body(level, buttons, panel(seed, level, salt))
            } else {
                vec![
                    Node::new("div").attr("class", "header").child(Node::new("h1").text("Done")),
                    Node::new("div").attr("class", "actions").child(link("Home", near_duplicate_state(0, false))),
                    panel(seed, level, salt),
                ]
            };
            if banner {
                let hint = Node::new("div")
                    .attr("class", "hint")
                    .attr("style", "position:absolute;left:640px;top:690px;width:340px;height:90px")
                    .child(Node::new("span").text("New here? Take the tour"))
                    .child(link("Dismiss", near_duplicate_state(level, false)));
                body.insert(0, hint);
            }
            pages.push(document(&format!("Level {level}"), &[], body));
        }
    }
    let success_path = correct
        .iter()
        .enumerate()
        .map(|(level, &j)| {
            // the banner div shifts the actions container to div[3]
            let container = if level == 0 { ACTIONS_PATH.to_string() } else { "/html[1]/body[1]/div[3]".to_string() };
            format!("{container}/button[{}]", j + 1)
        })
        .collect();
    Built {
        pages,
        truth: GroundTruth {
            state_count: 2 * (depth + 1),
            state_hashes: vec![],
            success_path,
            terminal_state: Some(near_duplicate_state(depth, true)),
            hidden_labels: vec![],
            expected_failures: vec![],
        },
    }
}

const NAV_PAGES: usize = 3;

fn hidden_action(hidden: usize, seed: u64, salt: u64) -> Built {
    let clicks = if hidden == 1 { 1 } else { (3 * hidden).div_ceil(5).min(hidden - 1) };
    let mut rng = stream(seed, "fixture/sidebar");
    // (kind, index): 0 = distractor, 1 = card, 2 = tile
    let mut items: Vec<(u8, usize)> = (0..hidden).map(|j| (if j < clicks { 1 } else { 2 }, j)).collect();
    items.extend((0..hidden.max(4)).map(|j| (0u8, j)));
    items.shuffle(&mut rng);
    let sidebar_children: Vec<Node> = items
        .iter()
        .map(|&(kind, j)| match kind {
            1 => Node::new("div")
                .attr("class", "card")
                .attr("onclick", nav(NAV_PAGES + j))
                .text(format!("Item {}", j + 1)),
            2 => Node::new("div")
                .attr("class", "tile")
                .attr("ondblclick", nav(NAV_PAGES + j))
                .text(format!("Tile {}", j + 1)),
            _ if j % 2 == 0 => Node::new("span").attr("class", "note").text(format!("Note {}", j + 1)),
            _ => Node::new("div").attr("class", "info").text(format!("Info {}", j + 1)),
        })
        .collect();
    let sidebar = Node::new("div").attr("class", "sidebar").children(sidebar_children);
    let nav_bar = Node::new("div")
        .attr("class", "nav")
        .children((0..NAV_PAGES).map(|p| link(["Home", "Reports", "Settings"][p], p)).collect::<Vec<_>>());
    let total = NAV_PAGES + hidden;
    let mut pages = Vec::new();
    let mut labels = Vec::new();
    for state in 0..total {
        let body = vec![nav_bar.clone(), sidebar.clone(), panel(seed, state, salt)];
        pages.push(document(&format!("Page {state}"), &[], body));
        for (i, &(kind, _)) in items.iter().enumerate() {
            labels.push((state, format!("/html[1]/body[1]/div[2]/{}", sidebar_locator(&items, i)), kind));
        }
    }
    Built {
        pages,
        truth: GroundTruth {
            state_count: total,
            state_hashes: vec![],
            success_path: vec![],
            terminal_state: None,
            hidden_labels: labels,
            expected_failures: vec![],
        },
    }
}

fn sidebar_locator(items: &[(u8, usize)], i: usize) -> String {
    let tag_of = |&(kind, j): &(u8, usize)| if kind == 0 && j % 2 == 0 { "span" } else { "div" };
    let tag = tag_of(&items[i]);
    let idx = items[..=i].iter().filter(|it| tag_of(it) == tag).count();
    format!("{tag}[{idx}]")
}

fn wide(branches: usize, depth: usize, seed: u64, salt: u64) -> Built {
    let id = |b: usize, d: usize| 1 + b * depth + d;
    let mut pages = Vec::new();
    let hub_links: Vec<Node> = (0..branches).map(|b| link(&format!("Section {}", b + 1), id(b, 0))).collect();
    pages.push(document("Hub", &[], level_body(0, hub_links, panel(seed, 0, salt))));
    for b in 0..branches {
        for d in 0..depth {
            let mut links = vec![link("Hub", 0), link("Refresh", id(b, d))];
            if d + 1 < depth {
                links.push(link("Next", id(b, d + 1)));
            }
            pages.push(document(&format!("Section {b}.{d}"), &[], level_body(d + 1, links, panel(seed, id(b, d), salt))));
        }
    }
    Built {
        pages,
        truth: GroundTruth {
            state_count: 1 + branches * depth,
            state_hashes: vec![],
            success_path: vec![],
            terminal_state: None,
            hidden_labels: vec![],
            expected_failures: vec![],
        },
    }
}

/// Console lines logged by the failing fixture's pages, one per page.
pub const FAILING_MESSAGES: &[&str] = &[
    "Error: Param values not valid for state \"petNew\"",
    "Error: Param values not valid for state \"ownerEdit\"",
    "Access to image at \"http://gravatar.com/avatar/?r=g&s=560&d=blank\" blocked",
    "Access to image at \"http://gravatar.com/avatar/?r=g&s=80&d=blank\" blocked",
];

fn failing(seed: u64, salt: u64) -> Built {
    let n = FAILING_MESSAGES.len();
    let mut pages = Vec::new();
    let buttons: Vec<Node> = (0..n).map(|i| button(&format!("Open {}", i + 1), i + 1)).collect();
    pages.push(document("Home", &[], level_body(0, buttons, panel(seed, 0, salt))));
    for (i, msg) in FAILING_MESSAGES.iter().enumerate() {
        let script = format!("console.error({});", serde_json::to_string(msg).expect("string"));
        let body = level_body(i + 1, vec![link("Home", 0)], panel(seed, i + 1, salt));
        pages.push(document(&format!("Page {}", i + 1), &[script], body));
    }
    let mut expected: Vec<String> = FAILING_MESSAGES.iter().map(|m| failure_signature(m)).collect();
    expected.sort();
    expected.dedup();
    Built {
        pages,
        truth: GroundTruth {
            state_count: n + 1,
            state_hashes: vec![],
            success_path: vec![],
            terminal_state: None,
            hidden_labels: vec![],
            expected_failures: expected,
        },
    }
}
