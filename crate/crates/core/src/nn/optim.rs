use super::{Gradients, MlpParams, Scalar};
use crate::error::{contract, Result};

/// Adaptive-moment (Adam) optimiser state.
///
/// Moment buffers mirror the parameter layout layer by layer.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimState<T = f32> {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    first: Vec<(Vec<T>, Vec<T>)>,
    second: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(params: &MlpParams<T>, learning_rate: f64) -> Self {
        let zeros: Vec<(Vec<T>, Vec<T>)> = params
            .layers()
            .iter()
            .map(|l| (vec![T::default(); l.weights.len()], vec![T::default(); l.biases.len()]))
            .collect();
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    /// Whether the moment buffers have the same shape as `params`.
    pub fn matches(&self, params: &MlpParams<T>) -> bool {
        self.first.len() == params.layers().len()
            && params.layers().iter().zip(&self.first).zip(&self.second).all(|((l, m), v)| {
                m.0.len() == l.weights.len()
                    && m.1.len() == l.biases.len()
                    && v.0.len() == l.weights.len()
                    && v.1.len() == l.biases.len()
            })
    }

    pub(crate) fn apply(&mut self, params: &mut MlpParams<T>, grads: &Gradients) -> Result<()> {
        if !self.matches(params) {
            return Err(contract("optimiser state does not match parameter shapes"));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let update = |p: &mut [T], m: &mut [T], v: &mut [T], g: &[f64]| {
            for i in 0..p.len() {
                let mi = b1 * m[i].to_f64() + (1.0 - b1) * g[i];
                let vi = b2 * v[i].to_f64() + (1.0 - b2) * g[i] * g[i];
                m[i] = T::from_f64(mi);
                v[i] = T::from_f64(vi);
                let step = lr * (mi / c1) / ((vi / c2).sqrt() + eps);
                p[i] = T::from_f64(p[i].to_f64() - step);
            }
        };
        for (k, layer) in params.layers_mut().iter_mut().enumerate() {
            let (mw, mb) = &mut self.first[k];
            let (vw, vb) = &mut self.second[k];
            update(&mut layer.weights, mw, vw, &grads.layers[k].weights);
            update(&mut layer.biases, mb, vb, &grads.layers[k].biases);
        }
        Ok(())
    }
}
