use std::sync::Arc;

use super::fixture::{page_url, target_state, SimApp, SIM_ORIGIN};
use super::{Checkpoint, Environment, Observation};
use crate::actions::{Action, ActionClass};
use crate::dom::{ElementRef, Node};
use crate::error::EnvError;

/// In-process backend: a deterministic walk over a [`SimApp`]'s pages.
#[derive(Clone, Debug)]
pub struct SimEnv {
    app: Arc<SimApp>,
    current: usize,
}

fn script_target(script: Option<&str>) -> Option<usize> {
    script.filter(|s| s.contains("location")).and_then(target_state)
}

fn click_target_of(node: &Node, ancestors: &[&Node]) -> Option<usize> {
    if let Some(t) = script_target(node.get_attr("onclick")) {
        return Some(t);
    }
    if node.tag == "a" {
        if let Some(t) = node.get_attr("href").and_then(target_state) {
            return Some(t);
        }
    }
    let submits = match node.tag.as_str() {
        "button" => node.get_attr("type").map_or(true, |t| t.eq_ignore_ascii_case("submit")),
        "input" => node.get_attr("type").is_some_and(|t| t.eq_ignore_ascii_case("submit") || t == "image"),
        _ => false,
    };
    if submits {
        if let Some(form) = ancestors.iter().rev().find(|a| a.tag == "form") {
            return form.get_attr("action").and_then(target_state);
        }
    }
    None
}

/// Click with bubbling: the element first, then its ancestors.
fn click_target(el: &ElementRef<'_>) -> Option<usize> {
    (0..=el.ancestors.len()).rev().find_map(|depth| {
        let node = if depth == el.ancestors.len() { el.node } else { el.ancestors[depth] };
        click_target_of(node, &el.ancestors[..depth])
    })
}

fn dblclick_target(el: &ElementRef<'_>) -> Option<usize> {
    // a double-click delivers two clicks before the dblclick event
    click_target(el).or_else(|| {
        std::iter::once(el.node)
            .chain(el.ancestors.iter().rev().copied())
            .find_map(|n| script_target(n.get_attr("ondblclick")))
    })
}

impl SimEnv {
    pub fn new(app: Arc<SimApp>) -> Self {
        let current = app.start;
        Self { app, current }
    }

    pub fn app(&self) -> &SimApp {
        &self.app
    }

    pub fn current_state(&self) -> usize {
        self.current
    }

    fn observe(&self, fresh_load: bool) -> Observation {
        let page = &self.app.pages[self.current];
        Observation {
            html: page.html.clone(),
            geometry: page.geometry.clone(),
            page_size: page.page_size,
            console: if fresh_load { page.console.clone() } else { Vec::new() },
            nav_url: page_url(SIM_ORIGIN, self.current),
        }
    }

    fn goto(&mut self, target: usize) -> Result<Observation, EnvError> {
        if target >= self.app.pages.len() {
            return Err(EnvError::Navigation(format!("no page {target}")));
        }
        self.current = target;
        Ok(self.observe(true))
    }
}

impl Environment for SimEnv {
    fn reset(&mut self) -> Result<Observation, EnvError> {
        self.goto(self.app.start)
    }

    fn step(&mut self, action: &Action) -> Result<Observation, EnvError> {
        let page = &self.app.pages[self.current];
        let el = page.tree.resolve(&action.locator).ok_or_else(|| EnvError::StaleLocator(action.locator.clone()))?;
        let target = match action.class {
            ActionClass::Click => click_target(&el),
            ActionClass::Dbclick => dblclick_target(&el),
            ActionClass::FormFill => el.node.get_attr("action").and_then(target_state),
            ActionClass::Input | ActionClass::Select => None,
        };
        match target {
            Some(t) => self.goto(t),
            None => Ok(self.observe(false)),
        }
    }

    fn checkpoint(&self) -> Option<Checkpoint> {
        Some(Checkpoint(self.current.to_string()))
    }

    fn restore(&mut self, checkpoint: &Checkpoint) -> Result<Observation, EnvError> {
        let target = checkpoint.0.parse().map_err(|_| EnvError::Navigation("foreign checkpoint".into()))?;
        self.goto(target)
    }
}
