use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Scalar;
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Identity => v,
        }
    }
}

/// One dense layer. Weights are row-major `(outputs, inputs)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
    pub activation: Activation,
}

impl<T: Scalar> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![T::default(); inputs * outputs],
            biases: vec![T::default(); outputs],
            activation,
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> T {
        self.weights[out * self.inputs + inp]
    }
}

/// Parameters of a feed-forward perceptron.
///
/// Hidden layers use ReLU, the final layer is always the identity so the same
/// type serves regression heads (grid values) and classifier logits.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpParams<T = f32> {
    layers: Vec<Layer<T>>,
}

impl<T: Scalar> MlpParams<T> {
    /// Uniform fan-in initialisation: `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut params = Self::zeros(dims)?;
        for layer in &mut params.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                *w = T::from_f64(rng.gen_range(-bound..bound));
            }
        }
        Ok(params)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d == 0) {
            return Err(contract(format!("layer dims must be >= 2 positive entries, got {dims:?}")));
        }
        let last = dims.len() - 2;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(k, w)| {
                let act = if k == last { Activation::Identity } else { Activation::Relu };
                Layer::zeros(w[0], w[1], act)
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(contract("an MLP needs at least one layer"));
        }
        for (k, layer) in layers.iter().enumerate() {
            if layer.inputs == 0 || layer.outputs == 0 {
                return Err(contract(format!("layer {k} has a zero dimension")));
            }
            if layer.weights.len() != layer.inputs * layer.outputs || layer.biases.len() != layer.outputs {
                return Err(contract(format!("layer {k} storage does not match its shape")));
            }
            if k > 0 && layers[k - 1].outputs != layer.inputs {
                return Err(contract(format!("layer {k} input dim does not chain")));
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.to_f64().is_finite()) {
                return Err(contract(format!("layer {k} holds non-finite values")));
            }
        }
        if layers.last().map(|l| l.activation) != Some(Activation::Identity) {
            return Err(contract("final layer activation must be identity"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer<T>> {
        self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.biases).all(|v| v.to_f64().is_finite()))
    }

    /// Converts between storage widths (f32 <-> f64).
    pub fn cast<U: Scalar>(&self) -> MlpParams<U> {
        MlpParams {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    inputs: l.inputs,
                    outputs: l.outputs,
                    weights: l.weights.iter().map(|w| U::from_f64(w.to_f64())).collect(),
                    biases: l.biases.iter().map(|b| U::from_f64(b.to_f64())).collect(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let trace = self.forward_trace(x);
        Ok(trace.output().iter().map(|&v| T::from_f64(v)).collect())
    }

    pub(crate) fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(contract(format!(
                "input length {} does not match layer dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        if x.iter().any(|v| !v.to_f64().is_finite()) {
            return Err(contract("non-finite input"));
        }
        Ok(())
    }

    /// Forward pass keeping every layer's activations for backprop.
    pub(crate) fn forward_trace(&self, x: &[T]) -> Trace {
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.iter().map(|v| v.to_f64()).collect());
        for layer in &self.layers {
            let input = acts.last().expect("input pushed");
            let nz: Vec<usize> = (0..input.len()).filter(|&i| input[i] != 0.0).collect();
            let out: Vec<f64> = (0..layer.outputs)
                .map(|o| {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    let mut acc = layer.biases[o].to_f64();
                    for &i in &nz {
                        acc += row[i].to_f64() * input[i];
                    }
                    layer.activation.apply(acc)
                })
                .collect();
            acts.push(out);
        }
        Trace { acts }
    }

    /// Accumulates `d loss / d params` for one sample given `d loss / d output`.
    pub(crate) fn backward(&self, trace: &Trace, grad_out: &[f64], grads: &mut Gradients) {
        let mut delta = grad_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.acts[k];
            let output = &trace.acts[k + 1];
            if layer.activation == Activation::Relu {
                for (d, &o) in delta.iter_mut().zip(output) {
                    if o <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let g = &mut grads.layers[k];
            let nz: Vec<usize> = (0..input.len()).filter(|&i| input[i] != 0.0).collect();
            for o in 0..layer.outputs {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for &i in &nz {
                    row[i] += d * input[i];
                }
            }
            if k > 0 {
                let mut prev = vec![0.0; layer.inputs];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w.to_f64() * d;
                    }
                }
                delta = prev;
            }
        }
    }
}

pub(crate) struct Trace {
    acts: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("trace has output")
    }
}

/// Parameter gradients, accumulated in double precision.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like<T: Scalar>(params: &MlpParams<T>) -> Self {
        Self {
            layers: params
                .layers()
                .iter()
                .map(|l| LayerGrad { weights: vec![0.0; l.weights.len()], biases: vec![0.0; l.biases.len()] })
                .collect(),
        }
    }

    pub(crate) fn scale(&mut self, by: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.biases.iter_mut()).for_each(|g| *g *= by);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|&g| g == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|g| g.is_finite()))
    }
}
