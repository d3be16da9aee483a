//! Versioned binary model format.
//!
//! ```text
//! "GWNN" | u32 version | u32 layer count L | (L+1) x u32 dims | L x u8 activation
//!        | per layer: weights (row-major, f32 LE) then biases (f32 LE)
//! ```
//! All integers are little-endian.

use super::{Activation, Layer, MlpParams};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"GWNN";
pub const MODEL_VERSION: u32 = 1;

pub fn save_model(params: &MlpParams) -> Vec<u8> {
    let dims = params.layer_dims();
    let mut out = Vec::with_capacity(16 + 4 * params.parameter_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.layers().len() as u32).to_le_bytes());
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for l in params.layers() {
        out.push(match l.activation {
            Activation::Relu => 0,
            Activation::Identity => 1,
        });
    }
    for l in params.layers() {
        for v in l.weights.iter().chain(&l.biases) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Decode(format!("truncated at byte {}", self.pos))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn load_model(bytes: &[u8]) -> Result<MlpParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count == 0 || count > 1024 {
        return Err(Error::Decode(format!("implausible layer count {count}")));
    }
    let dims: Vec<usize> = (0..=count).map(|_| r.u32().map(|d| d as usize)).collect::<Result<_>>()?;
    let acts: Vec<Activation> = r
        .take(count)?
        .iter()
        .map(|&b| match b {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Identity),
            other => Err(Error::Decode(format!("unknown activation code {other}"))),
        })
        .collect::<Result<_>>()?;
    let mut layers = Vec::with_capacity(count);
    for k in 0..count {
        let (inputs, outputs) = (dims[k], dims[k + 1]);
        let n = inputs
            .checked_mul(outputs)
            .and_then(|w| w.checked_add(outputs))
            .ok_or_else(|| Error::Decode("layer size overflow".into()))?;
        let raw = r.take(n.checked_mul(4).ok_or_else(|| Error::Decode("layer size overflow".into()))?)?;
        let values: Vec<f32> =
            raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        let (w, b) = values.split_at(inputs * outputs);
        layers.push(Layer { inputs, outputs, weights: w.to_vec(), biases: b.to_vec(), activation: acts[k] });
    }
    if r.pos != bytes.len() {
        return Err(Error::Decode(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    MlpParams::from_layers(layers).map_err(|e| Error::Decode(e.to_string()))
}
