//! Minimal neural-network substrate shared by the value network, the action
//! discriminator and the reward model.
//!
//! Parameters are stored as `f32` (or `f64` for gradient checking) and every
//! reduction is accumulated in `f64`.

mod autoencoder;
mod io;
mod mlp;
mod optim;

pub use autoencoder::AutoencoderParams;
pub use io::{load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use mlp::{Activation, Gradients, Layer, LayerGrad, MlpParams};
pub use optim::OptimState;

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

/// Floating-point storage type for parameters.
pub trait Scalar: Copy + Default + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean squared error over outputs whose mask entry is non-zero.
    MaskedMse,
    /// Softmax cross-entropy against a target distribution; masked logits are
    /// left out of the softmax.
    SoftmaxCrossEntropy,
}

/// One training example. `mask[j] == 0` removes output `j` from the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<T = f32> {
    pub input: Vec<T>,
    pub target: Vec<T>,
    pub mask: Vec<T>,
}

impl<T: Scalar> Sample<T> {
    pub fn new(input: Vec<T>, target: Vec<T>, mask: Vec<T>) -> Self {
        Self { input, target, mask }
    }

    /// Sample with every output included.
    pub fn dense(input: Vec<T>, target: Vec<T>) -> Self {
        let mask = vec![T::from_f64(1.0); target.len()];
        Self { input, target, mask }
    }
}

/// Batch loss and its gradient with respect to every parameter.
pub fn loss_and_gradient<T: Scalar>(
    params: &MlpParams<T>,
    batch: &[Sample<T>],
    loss: Loss,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(contract("empty training batch"));
    }
    let out_dim = params.output_dim();
    for s in batch {
        params.check_input(&s.input)?;
        if s.target.len() != out_dim || s.mask.len() != out_dim {
            return Err(contract(format!(
                "target/mask length ({}, {}) does not match output dim {out_dim}",
                s.target.len(),
                s.mask.len()
            )));
        }
    }

    let mut grads = Gradients::zeros_like(params);
    let norm: f64 = match loss {
        Loss::MaskedMse => batch.iter().flat_map(|s| s.mask.iter()).map(|m| m.to_f64()).sum(),
        Loss::SoftmaxCrossEntropy => batch
            .iter()
            .filter(|s| s.mask.iter().any(|m| m.to_f64() != 0.0))
            .count() as f64,
    };
    if norm == 0.0 {
        return Ok((0.0, grads));
    }

    let mut total = 0.0;
    let mut grad_out = vec![0.0; out_dim];
    for s in batch {
        if s.mask.iter().all(|m| m.to_f64() == 0.0) {
            continue;
        }
        let trace = params.forward_trace(&s.input);
        let y = trace.output();
        grad_out.iter_mut().for_each(|g| *g = 0.0);
        match loss {
            Loss::MaskedMse => {
                for j in 0..out_dim {
                    let m = s.mask[j].to_f64();
                    if m == 0.0 {
                        continue;
                    }
                    let diff = y[j] - s.target[j].to_f64();
                    total += m * diff * diff;
                    grad_out[j] = 2.0 * m * diff;
                }
            }
            Loss::SoftmaxCrossEntropy => {
                let live: Vec<usize> = (0..out_dim).filter(|&j| s.mask[j].to_f64() != 0.0).collect();
                let max = live.iter().map(|&j| y[j]).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = live.iter().map(|&j| (y[j] - max).exp()).sum();
                let log_z = z.ln() + max;
                let t_sum: f64 = live.iter().map(|&j| s.target[j].to_f64()).sum();
                for &j in &live {
                    let t = s.target[j].to_f64();
                    let log_p = y[j] - log_z;
                    total -= t * log_p;
                    grad_out[j] = log_p.exp() * t_sum - t;
                }
            }
        }
        params.backward(&trace, &grad_out, &mut grads);
    }
    grads.scale(1.0 / norm);
    let value = total / norm;
    if !value.is_finite() || !grads.is_finite() {
        return Err(Error::Training(format!("non-finite loss {value}")));
    }
    Ok((value, grads))
}

/// One optimiser step. Returns the pre-update batch loss.
///
/// On a non-finite loss the parameters and optimiser are left untouched. A
/// batch whose masks are all zero yields loss 0 and no update.
pub fn train_step<T: Scalar>(
    params: &mut MlpParams<T>,
    opt: &mut OptimState<T>,
    batch: &[Sample<T>],
    loss: Loss,
) -> Result<f64> {
    let (value, grads) = loss_and_gradient(params, batch, loss)?;
    if grads.is_zero() && value == 0.0 {
        return Ok(0.0);
    }
    opt.apply(params, &grads)?;
    Ok(value)
}
