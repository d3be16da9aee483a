use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GridSpec;
use crate::actions::{Action, ActionClass, Payload};
use crate::dom::StateEmbedding;
use crate::geom::Point;

/// One experience tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: StateEmbedding,
    pub grid: GridSpec,
    pub action: Action,
    /// Position of `action` in the step's action list (list-based variant).
    pub action_index: usize,
    /// (cell index, β) for every covered cell.
    pub covered: Vec<(usize, f64)>,
    pub reward: f64,
    pub s_next: StateEmbedding,
    pub next_grid: GridSpec,
    pub next_actions: Vec<Action>,
    pub terminal: bool,
}

/// FIFO experience store that remembers episode boundaries.
#[derive(Clone, Debug)]
pub struct ReplayStore {
    capacity: usize,
    items: VecDeque<Transition>,
    episode_lens: VecDeque<usize>,
}

impl ReplayStore {
    pub fn new(capacity: usize) -> Self {
        Self { capacity: capacity.max(1), items: VecDeque::new(), episode_lens: VecDeque::new() }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn episodes(&self) -> usize {
        self.episode_lens.len()
    }

    /// Appends one episode's transitions, evicting the oldest transitions
    /// beyond capacity.
    pub fn push_episode(&mut self, episode: Vec<Transition>) {
        if episode.is_empty() {
            return;
        }
        self.episode_lens.push_back(episode.len());
        self.items.extend(episode);
        while self.items.len() > self.capacity {
            self.items.pop_front();
            let front = self.episode_lens.front_mut().expect("lengths track items");
            *front -= 1;
            if *front == 0 {
                self.episode_lens.pop_front();
            }
        }
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.items.get(i)
    }

    /// Transitions of episode `e` (0 = oldest retained).
    pub fn episode(&self, e: usize) -> Vec<&Transition> {
        let start: usize = self.episode_lens.iter().take(e).sum();
        let len = self.episode_lens.get(e).copied().unwrap_or(0);
        self.items.range(start..start + len).collect()
    }

    /// `k` uniform draws with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Vec<&Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..k).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}

/// One line of the trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub episode: usize,
    pub step: usize,
    /// State hashes are written as hex strings so JSON readers keep all bits.
    pub state: String,
    pub locator: String,
    pub class: ActionClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    pub center: Point,
    pub covered: Vec<(usize, f64)>,
    pub r_ep: f64,
    pub alpha: f64,
    pub reward: f64,
    pub next_state: String,
    pub terminal: bool,
}

pub fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}
