use rand::Rng;

use super::{train_step, Loss, MlpParams, OptimState, Sample};
use crate::error::{contract, Result};

/// Reconstruction autoencoder `decode(encode(x))`.
#[derive(Clone, Debug, PartialEq)]
pub struct AutoencoderParams {
    pub encoder: MlpParams,
    pub decoder: MlpParams,
}

impl AutoencoderParams {
    /// `d -> d/2 -> bottleneck -> d/2 -> d`.
    pub fn new<R: Rng + ?Sized>(dim: usize, bottleneck: usize, rng: &mut R) -> Result<Self> {
        if bottleneck == 0 || bottleneck >= dim {
            return Err(contract(format!("bottleneck {bottleneck} must be in 1..{dim}")));
        }
        let hidden = (dim / 2).max(bottleneck);
        let encoder = MlpParams::new(&[dim, hidden, bottleneck], rng)?;
        let decoder = MlpParams::new(&[bottleneck, hidden, dim], rng)?;
        Self::from_parts(encoder, decoder)
    }

    pub fn zeros(dim: usize, bottleneck: usize) -> Result<Self> {
        Self::from_parts(
            MlpParams::zeros(&[dim, bottleneck])?,
            MlpParams::zeros(&[bottleneck, dim])?,
        )
    }

    pub fn from_parts(encoder: MlpParams, decoder: MlpParams) -> Result<Self> {
        if encoder.input_dim() != decoder.output_dim() {
            return Err(contract("encoder input dim must equal decoder output dim"));
        }
        if encoder.output_dim() != decoder.input_dim() {
            return Err(contract("encoder output dim must equal decoder input dim"));
        }
        if encoder.output_dim() >= encoder.input_dim() {
            return Err(contract("bottleneck must be narrower than the input"));
        }
        Ok(Self { encoder, decoder })
    }

    pub fn dim(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn reconstruct(&self, x: &[f32]) -> Result<Vec<f32>> {
        let code = self.encoder.forward(x)?;
        self.decoder.forward(&code)
    }

    /// Squared Euclidean reconstruction error `||decode(encode(x)) - x||^2`.
    pub fn error(&self, x: &[f32]) -> Result<f64> {
        let y = self.reconstruct(x)?;
        Ok(y.iter().zip(x).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum())
    }

    /// Encoder and decoder stacked into one network, so a single optimiser can
    /// train the whole reconstruction path.
    pub fn joined(&self) -> MlpParams {
        let mut layers = self.encoder.clone().into_layers();
        layers.extend(self.decoder.clone().into_layers());
        MlpParams::from_layers(layers).expect("autoencoder halves chain")
    }

    fn split(&mut self, joined: MlpParams) {
        let k = self.encoder.layers().len();
        let mut layers = joined.into_layers();
        let dec = layers.split_off(k);
        self.encoder = MlpParams::from_layers(layers).expect("encoder from joined");
        self.decoder = MlpParams::from_layers(dec).expect("decoder from joined");
    }

    /// Runs `steps` full-batch reconstruction steps on `states`. Returns the
    /// loss trace. On divergence the parameters are restored and the error
    /// surfaced.
    pub fn fit(&mut self, opt: &mut OptimState, states: &[Vec<f32>], steps: usize) -> Result<Vec<f64>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        // identical states merge into one sample weighted by multiplicity;
        // the masked loss is unchanged
        let mut batch: Vec<Sample> = Vec::new();
        for s in states {
            match batch.iter_mut().find(|b| b.input == *s) {
                Some(b) => b.mask.iter_mut().for_each(|m| *m += 1.0),
                None => batch.push(Sample::dense(s.clone(), s.clone())),
            }
        }
        let mut net = self.joined();
        let mut trace = Vec::with_capacity(steps);
        for _ in 0..steps {
            trace.push(train_step(&mut net, opt, &batch, Loss::MaskedMse)?);
        }
        if !net.is_finite() {
            return Err(crate::error::Error::Training("autoencoder parameters went non-finite".into()));
        }
        self.split(net);
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_autoencoder_error_is_squared_norm() {
        let ae = AutoencoderParams::zeros(4, 2).unwrap();
        let x = [0.6f32, 0.0, 0.8, 0.0];
        assert!((ae.error(&x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn perfect_reconstruction_has_zero_error() {
        // encoder keeps coordinates 0 and 1, decoder writes them back.
        let enc = Layer {
            inputs: 3,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            biases: vec![0.0; 2],
            activation: Activation::Identity,
        };
        let dec = Layer {
            inputs: 2,
            outputs: 3,
            weights: vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            biases: vec![0.0; 3],
            activation: Activation::Identity,
        };
        let ae = AutoencoderParams::from_parts(
            MlpParams::from_layers(vec![enc]).unwrap(),
            MlpParams::from_layers(vec![dec]).unwrap(),
        )
        .unwrap();
        assert_eq!(ae.error(&[0.3, -0.7, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ae = AutoencoderParams::zeros(4, 2).unwrap();
        assert!(ae.error(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn fit_on_empty_set_is_a_no_op() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ae = AutoencoderParams::new(8, 2, &mut rng).unwrap();
        let before = ae.clone();
        let mut opt = OptimState::new(&ae.joined(), 1e-3);
        assert!(ae.fit(&mut opt, &[], 50).unwrap().is_empty());
        assert_eq!(ae, before);
    }
}
