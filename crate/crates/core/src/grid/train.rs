use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::list::{list_targets_from, list_values};
use super::{value_at, GridSpec, ReplayStore, Transition};
use crate::actions::Action;
use crate::dom::StateEmbedding;
use crate::error::{contract, Error, Result};
use crate::nn::{train_step, Loss, MlpParams, OptimState, Sample};
use crate::rng::RunRng;

/// How the bootstrap term `M` aggregates a next action's covered cells.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// `M = max_a' Σ cells(a')`, the selection-time action value.
    Sum,
    /// `M = max_a' mean cells(a')`. Keeps the per-cell backup a contraction
    /// when an action covers several cells.
    #[default]
    Mean,
}

fn bootstrap(out: &[f32], actions: &[Action], grid: &GridSpec, mode: BootstrapMode) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for a in actions {
        let v = match mode {
            BootstrapMode::Sum => value_at(out, a.center, grid)?,
            BootstrapMode::Mean => {
                let cells = super::covered_cells(a.center, grid)?;
                cells.iter().map(|&(i, _)| out[i] as f64).sum::<f64>() / cells.len() as f64
            }
        };
        best = best.max(v);
    }
    Ok(best)
}

/// Per-cell regression targets `β_i·r + γ·M` on covered cells, with a mask
/// selecting exactly those cells. `M` is 0 for terminal transitions and
/// dead ends.
pub fn make_targets(
    t: &Transition,
    target_net: &MlpParams,
    gamma: f64,
    mode: BootstrapMode,
) -> Result<(Vec<f32>, Vec<f32>)> {
    let next = if t.terminal || t.next_actions.is_empty() { None } else { Some(target_net.forward(&t.s_next.vector)?) };
    grid_targets_from(t, next.as_deref(), target_net.output_dim(), gamma, mode)
}

fn grid_targets_from(
    t: &Transition,
    next_out: Option<&[f32]>,
    width: usize,
    gamma: f64,
    mode: BootstrapMode,
) -> Result<(Vec<f32>, Vec<f32>)> {
    if width != t.grid.cells() || width != t.next_grid.cells() {
        return Err(contract("value net width does not match the transition grid"));
    }
    if t.covered.is_empty() {
        return Err(contract("transition covers no cells"));
    }
    let m = match next_out {
        Some(out) if !t.terminal && !t.next_actions.is_empty() => bootstrap(out, &t.next_actions, &t.next_grid, mode)?,
        _ => 0.0,
    };
    let mut target = vec![0.0f32; width];
    let mut mask = vec![0.0f32; width];
    for &(i, beta) in &t.covered {
        if i >= width {
            return Err(contract(format!("covered cell {i} outside the grid")));
        }
        target[i] = (beta * t.reward + gamma * m) as f32;
        mask[i] = 1.0;
    }
    Ok((target, mask))
}

/// Output layout of the value network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ValueHead {
    /// One output per grid cell.
    Grid { n: usize },
    /// One output per action slot in document order.
    List { width: usize },
}

impl ValueHead {
    pub fn width(&self) -> usize {
        match *self {
            ValueHead::Grid { n } => n * n,
            ValueHead::List { width } => width,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DqnConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Optimiser steps between target-network copies.
    pub sync_every: usize,
    /// Optimiser steps run at each episode end.
    pub updates_per_episode: usize,
    pub bootstrap: BootstrapMode,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256],
            learning_rate: 1e-3,
            batch_size: 64,
            replay_capacity: 50_000,
            sync_every: 200,
            updates_per_episode: 16,
            bootstrap: BootstrapMode::Mean,
        }
    }
}

/// Online and target value networks with their optimiser.
#[derive(Clone, Debug)]
pub struct Dqn {
    pub online: MlpParams,
    pub target: MlpParams,
    pub opt: OptimState,
    pub head: ValueHead,
    pub config: DqnConfig,
    pub updates: usize,
    /// Target-net outputs by state hash, valid until the next sync.
    next_cache: HashMap<u64, Vec<f32>>,
}

impl Dqn {
    pub fn new(input_dim: usize, head: ValueHead, config: DqnConfig, rng: &mut RunRng) -> Result<Self> {
        let mut dims = vec![input_dim];
        dims.extend(&config.hidden);
        dims.push(head.width());
        let online = MlpParams::new(&dims, rng)?;
        let opt = OptimState::new(&online, config.learning_rate);
        Ok(Self { target: online.clone(), online, opt, head, config, updates: 0, next_cache: HashMap::new() })
    }

    /// Value of each action on a page with grid `grid`.
    pub fn action_values(&self, s: &StateEmbedding, actions: &[Action], grid: &GridSpec) -> Result<Vec<f64>> {
        let out = self.online.forward(&s.vector)?;
        match self.head {
            ValueHead::Grid { n } => {
                if grid.n != n {
                    return Err(contract("grid size differs from the value head"));
                }
                actions.iter().map(|a| value_at(&out, a.center, grid)).collect()
            }
            ValueHead::List { .. } => Ok(list_values(&out, actions.len())),
        }
    }

    pub fn sync(&mut self) {
        self.target = self.online.clone();
        self.next_cache.clear();
    }

    fn next_output(&mut self, s: &StateEmbedding) -> Result<Vec<f32>> {
        if let Some(v) = self.next_cache.get(&s.hash) {
            return Ok(v.clone());
        }
        let v = self.target.forward(&s.vector)?;
        self.next_cache.insert(s.hash, v.clone());
        Ok(v)
    }

    fn targets(&mut self, t: &Transition, gamma: f64) -> Result<(Vec<f32>, Vec<f32>)> {
        let needs_next = !t.terminal && !t.next_actions.is_empty();
        let next = if needs_next { Some(self.next_output(&t.s_next)?) } else { None };
        let width = self.head.width();
        match self.head {
            ValueHead::Grid { .. } => grid_targets_from(t, next.as_deref(), width, gamma, self.config.bootstrap),
            ValueHead::List { .. } => list_targets_from(t, next.as_deref(), width, gamma),
        }
    }

    /// One optimiser step on `batch`. On a non-finite loss the parameters
    /// are kept and the error is returned.
    pub fn update(&mut self, batch: &[&Transition], gamma: f64) -> Result<f64> {
        let mut samples = Vec::with_capacity(batch.len());
        for t in batch {
            let (target, mask) = self.targets(t, gamma)?;
            samples.push(Sample::new(t.s.vector.clone(), target, mask));
        }
        let loss = train_step(&mut self.online, &mut self.opt, &samples, Loss::MaskedMse)?;
        self.updates += 1;
        if self.updates % self.config.sync_every.max(1) == 0 {
            self.sync();
        }
        Ok(loss)
    }

    /// `updates_per_episode` steps on uniform replay batches. Returns the
    /// mean loss, or `None` when the store is empty.
    pub fn train(&mut self, replay: &ReplayStore, gamma: f64, rng: &mut RunRng) -> Result<Option<f64>> {
        if replay.is_empty() {
            return Ok(None);
        }
        let mut total = 0.0;
        let mut done = 0usize;
        for _ in 0..self.config.updates_per_episode {
            let batch = replay.sample(self.config.batch_size, rng);
            match self.update(&batch, gamma) {
                Ok(l) => {
                    total += l;
                    done += 1;
                }
                Err(Error::Training(msg)) => warn!("value update skipped: {msg}"),
                Err(e) => return Err(e),
            }
        }
        Ok((done > 0).then(|| total / done as f64))
    }
}
