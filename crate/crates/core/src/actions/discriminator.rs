use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::ElementEmbedding;
use crate::error::{contract, Result};
use crate::nn::{train_step, Loss, MlpParams, OptimState, Sample};
use crate::rng::RunRng;

pub const LABEL_NONE: u8 = 0;
pub const LABEL_CLICK: u8 = 1;
pub const LABEL_DBCLICK: u8 = 2;

/// A labelled execution of an element: 0 = no effect, 1 = click, 2 = dbclick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSample {
    pub element: ElementEmbedding,
    pub label: u8,
    pub episode: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    /// Heuristics only.
    Heuristic,
    /// The discriminator also proposes actions.
    Assisted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscriminatorConfig {
    pub element_dim: usize,
    pub hidden: [usize; 2],
    /// Phase switches once the data set holds strictly more samples than this.
    pub threshold: usize,
    /// Retrain period (episodes) once assisted.
    pub retrain_every: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Early stop once an epoch's mean loss drops below this.
    pub target_loss: f64,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            element_dim: 128,
            hidden: [128, 64],
            threshold: 200,
            retrain_every: 10,
            max_epochs: 200,
            batch_size: 64,
            learning_rate: 3e-3,
            target_loss: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateOutcome {
    Skipped,
    Activated,
    Retrained,
    /// Training diverged; the previous network was kept.
    Diverged,
}

/// Four-layer classifier `element_dim -> h1 -> h2 -> 3` plus its data set.
#[derive(Clone, Debug)]
pub struct DiscriminatorState {
    pub net: MlpParams,
    pub data: Vec<ProbeSample>,
    pub phase: Phase,
    pub config: DiscriminatorConfig,
    trained: bool,
}

impl DiscriminatorState {
    pub fn new(config: DiscriminatorConfig, rng: &mut RunRng) -> Result<Self> {
        let net = MlpParams::new(&[config.element_dim, config.hidden[0], config.hidden[1], 3], rng)?;
        Ok(Self { net, data: Vec::new(), phase: Phase::Heuristic, config, trained: false })
    }

    /// Replaces the network (used by tests and model loading).
    pub fn with_net(mut self, net: MlpParams) -> Result<Self> {
        if net.input_dim() != self.config.element_dim || net.output_dim() != 3 {
            return Err(contract("discriminator net must map element_dim -> 3"));
        }
        self.net = net;
        Ok(self)
    }

    pub fn is_assisted(&self) -> bool {
        self.phase == Phase::Assisted
    }

    pub fn record(&mut self, sample: ProbeSample) {
        self.data.push(sample);
    }

    /// Class logits, usable in any phase (evaluation).
    pub fn logits(&self, elem: &ElementEmbedding) -> Result<Vec<f32>> {
        self.net.forward(&elem.vector)
    }

    /// Argmax over the three logits; ties go to the lower class.
    pub fn predict(&self, elem: &ElementEmbedding) -> Result<u8> {
        if self.phase != Phase::Assisted {
            return Err(contract("discriminator queried before activation"));
        }
        self.classify(elem)
    }

    /// Like [`predict`](Self::predict) without the phase check.
    pub fn classify(&self, elem: &ElementEmbedding) -> Result<u8> {
        let logits = self.logits(elem)?;
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        Ok(best as u8)
    }

    /// End-of-episode phase logic: activate once the data outgrows the
    /// threshold, afterwards retrain every `retrain_every` episodes.
    pub fn maybe_update(&mut self, episode: usize, rng: &mut RunRng) -> UpdateOutcome {
        match self.phase {
            Phase::Heuristic if self.data.len() > self.config.threshold => match self.train(rng) {
                Ok(()) => {
                    self.phase = Phase::Assisted;
                    UpdateOutcome::Activated
                }
                Err(e) => {
                    warn!("discriminator training failed: {e}");
                    UpdateOutcome::Diverged
                }
            },
            Phase::Assisted if episode % self.config.retrain_every.max(1) == 0 => match self.train(rng) {
                Ok(()) => UpdateOutcome::Retrained,
                Err(e) => {
                    warn!("discriminator retraining failed, keeping previous net: {e}");
                    UpdateOutcome::Diverged
                }
            },
            _ => UpdateOutcome::Skipped,
        }
    }

    /// Trains on all accumulated samples. The network is only replaced when
    /// training finishes with finite loss.
    pub fn train(&mut self, rng: &mut RunRng) -> Result<()> {
        if self.data.is_empty() {
            return Err(contract("no probe data to train on"));
        }
        let samples: Vec<Sample> = self
            .data
            .iter()
            .map(|s| {
                let mut target = vec![0.0; 3];
                target[s.label.min(2) as usize] = 1.0;
                Sample::dense(s.element.vector.clone(), target)
            })
            .collect();
        let mut net = self.net.clone();
        let mut opt = OptimState::new(&net, self.config.learning_rate);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        for _ in 0..self.config.max_epochs {
            order.shuffle(rng);
            let mut total = 0.0;
            let mut batches = 0;
            for chunk in order.chunks(self.config.batch_size.max(1)) {
                let batch: Vec<Sample> = chunk.iter().map(|&i| samples[i].clone()).collect();
                total += train_step(&mut net, &mut opt, &batch, Loss::SoftmaxCrossEntropy)?;
                batches += 1;
            }
            if total / batches as f64 <= self.config.target_loss {
                break;
            }
        }
        self.net = net;
        self.trained = true;
        Ok(())
    }

    pub fn has_trained(&self) -> bool {
        self.trained
    }

    /// Fraction of `samples` whose label the current net reproduces.
    pub fn accuracy(&self, samples: &[ProbeSample]) -> Result<f64> {
        if samples.is_empty() {
            return Ok(0.0);
        }
        let mut hit = 0usize;
        for s in samples {
            if self.classify(&s.element)? == s.label {
                hit += 1;
            }
        }
        Ok(hit as f64 / samples.len() as f64)
    }
}
