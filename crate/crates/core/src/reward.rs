//! Curiosity reward: an episodic novelty term from a per-episode feature
//! buffer, scaled by a global novelty factor taken from an autoencoder's
//! reconstruction error.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::dom::{cosine, StateEmbedding};
use crate::error::{contract, Result};
use crate::nn::{AutoencoderParams, MlpParams, OptimState};
use crate::rng::RunRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    /// Cosine similarity at or above which two features count as the same visit.
    pub tau: f64,
    /// Upper clamp `L` on the global multiplier.
    pub scale_limit: f64,
    /// Widths of the frozen feature network after the input layer.
    pub feature_dims: Vec<usize>,
    /// Autoencoder code width; `None` uses a quarter of the embedding width.
    pub bottleneck: Option<usize>,
    /// Autoencoder steps per episode end.
    pub ae_steps: usize,
    pub ae_learning_rate: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { tau: 0.95, scale_limit: 5.0, feature_dims: vec![64, 32], bottleneck: None, ae_steps: 50, ae_learning_rate: 1e-3 }
    }
}

impl RewardConfig {
    pub fn bottleneck_for(&self, dim: usize) -> usize {
        self.bottleneck.unwrap_or((dim / 4).max(1))
    }
}

/// Feature vectors of the states visited in the current episode.
#[derive(Clone, Debug, Default)]
pub struct EpisodeBuffer {
    pub features: Vec<Vec<f32>>,
    pub tau: f64,
}

impl EpisodeBuffer {
    pub fn new(tau: f64) -> Self {
        Self { features: Vec::new(), tau }
    }

    pub fn clear(&mut self) {
        self.features.clear();
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn push(&mut self, f: Vec<f32>) {
        self.features.push(f);
    }

    /// Entries equal to `f` or with cosine at least `tau`.
    pub fn count_similar(&self, f: &[f32]) -> Result<usize> {
        let mut n = 0;
        for g in &self.features {
            if g.as_slice() == f || cosine(g, f)? >= self.tau {
                n += 1;
            }
        }
        Ok(n)
    }
}

/// `1/√n` where `n` counts buffer entries similar to `f_t`; `f_t` must already
/// be in the buffer.
pub fn episodic_reward(buf: &EpisodeBuffer, f_t: &[f32]) -> Result<f64> {
    let n = buf.count_similar(f_t)?;
    if n == 0 {
        return Err(contract("current feature missing from the episode buffer"));
    }
    Ok(1.0 / (n as f64).sqrt())
}

/// `r_ep · min(max(α, 1), L)`.
pub fn mix(r_ep: f64, alpha: f64, limit: f64) -> f64 {
    r_ep * global_multiplier(alpha, limit)
}

/// `min(max(α, 1), L)`.
pub fn global_multiplier(alpha: f64, limit: f64) -> f64 {
    alpha.max(1.0).min(limit)
}

/// Frozen random feature projection plus the global-novelty autoencoder.
#[derive(Clone, Debug)]
pub struct RewardModelState {
    pub feature_net: MlpParams,
    pub global_ae: AutoencoderParams,
    pub opt: OptimState,
    pub limit: f64,
    pub tau: f64,
    pub ae_steps: usize,
}

impl RewardModelState {
    pub fn new(dim: usize, config: &RewardConfig, rng: &mut RunRng) -> Result<Self> {
        if config.scale_limit < 1.0 {
            return Err(contract("reward scale limit must be at least 1"));
        }
        let dims: Vec<usize> = std::iter::once(dim).chain(config.feature_dims.iter().copied()).collect();
        let feature_net = MlpParams::new(&dims, rng)?;
        let global_ae = AutoencoderParams::new(dim, config.bottleneck_for(dim), rng)?;
        let opt = OptimState::new(&global_ae.joined(), config.ae_learning_rate);
        Ok(Self { feature_net, global_ae, opt, limit: config.scale_limit, tau: config.tau, ae_steps: config.ae_steps })
    }

    pub fn features(&self, s: &StateEmbedding) -> Result<Vec<f32>> {
        self.feature_net.forward(&s.vector)
    }

    /// `α = ||g(s) - s||²`.
    pub fn global_factor(&self, s: &StateEmbedding) -> Result<f64> {
        self.global_ae.error(&s.vector)
    }

    /// Trains the autoencoder on the episode's states. Returns the last loss,
    /// or `None` for an empty episode. A diverging update is discarded.
    pub fn end_episode_update(&mut self, states: &[StateEmbedding]) -> Result<Option<f64>> {
        if states.is_empty() {
            return Ok(None);
        }
        let vectors: Vec<Vec<f32>> = states.iter().map(|s| s.vector.clone()).collect();
        let mut ae = self.global_ae.clone();
        let mut opt = self.opt.clone();
        match ae.fit(&mut opt, &vectors, self.ae_steps) {
            Ok(trace) => {
                self.global_ae = ae;
                self.opt = opt;
                Ok(trace.last().copied())
            }
            Err(e) => {
                warn!("reward autoencoder update discarded: {e}");
                Ok(None)
            }
        }
    }
}
