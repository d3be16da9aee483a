use log::warn;

use super::heuristic::candidate_leaves;
use super::{encode_element, Action, ActionClass, Origin, ProbeSample, LABEL_CLICK, LABEL_DBCLICK, LABEL_NONE};
use crate::env::{return_to, ConsoleEntry, Environment, Observation};

/// Round-robin cursor over a page's unrecognised leaves, capped per episode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeRound {
    pub cap: usize,
    cursor: usize,
}

impl ProbeRound {
    pub fn new(cap: usize) -> Self {
        Self { cap, cursor: 0 }
    }

    /// Indices into a candidate list of length `n` for this episode.
    pub fn select(&mut self, n: usize) -> Vec<usize> {
        if n == 0 {
            return Vec::new();
        }
        let take = self.cap.min(n);
        let start = self.cursor % n;
        self.cursor = (start + take) % n;
        (0..take).map(|i| (start + i) % n).collect()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ProbeOutcome {
    pub samples: Vec<ProbeSample>,
    /// Environment steps spent, restores included.
    pub env_steps: usize,
    /// An environment failure or a failed restore cut the batch short.
    pub truncated: bool,
    pub console: Vec<ConsoleEntry>,
}

/// Executes unrecognised leaves of `page` in turn. A click that changes the
/// exact state labels the element 1; otherwise a double-click that changes it
/// labels 2; otherwise 0. After a change the environment is brought back to
/// `page` (checkpoint when available, else reset and replay of `path`).
///
/// The environment must currently be showing `page`.
pub fn probe_page(
    env: &mut dyn Environment,
    page: &Observation,
    path: &[Action],
    round: &mut ProbeRound,
    element_dim: usize,
    episode: usize,
) -> ProbeOutcome {
    let state = page.parse();
    let candidates = candidate_leaves(&state.tree, &page.geometry, page.page_size);
    let mut out = ProbeOutcome::default();
    if candidates.is_empty() {
        return out;
    }
    let checkpoint = env.checkpoint();
    let mut dirty = false;
    for i in round.select(candidates.len()) {
        let (el, bbox) = &candidates[i];
        if dirty {
            match return_to(env, checkpoint.as_ref(), path) {
                Ok(obs) if obs.state_hash() == state.hash => {
                    out.env_steps += if checkpoint.is_some() { 1 } else { 1 + path.len() };
                    dirty = false;
                }
                Ok(_) => {
                    warn!("probe restore diverged; keeping {} samples", out.samples.len());
                    out.truncated = true;
                    break;
                }
                Err(e) => {
                    warn!("probe restore failed: {e}");
                    out.truncated = true;
                    break;
                }
            }
        }
        let click = Action::new(el.locator.clone(), ActionClass::Click, *bbox, None, Origin::Discriminator);
        let mut label = LABEL_NONE;
        let mut failed = false;
        for (class, candidate_label) in [(ActionClass::Click, LABEL_CLICK), (ActionClass::Dbclick, LABEL_DBCLICK)] {
            out.env_steps += 1;
            match env.step(&click.with_class(class)) {
                Ok(obs) => {
                    out.console.extend(obs.console.iter().cloned());
                    if obs.state_hash() != state.hash {
                        label = candidate_label;
                        dirty = true;
                        break;
                    }
                }
                Err(e) if e.is_recoverable() => {
                    failed = true;
                    break;
                }
                Err(e) => {
                    warn!("probing aborted: {e}");
                    out.truncated = true;
                    return out;
                }
            }
        }
        if failed {
            continue;
        }
        let element = encode_element(el.node, &el.ancestors, element_dim);
        out.samples.push(ProbeSample { element, label, episode });
    }
    out
}
