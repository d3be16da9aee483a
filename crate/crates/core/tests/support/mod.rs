//! Independent reference implementations and fixtures shared by the
//! integration tests. Nothing here calls the crate routine it checks.

#![allow(dead_code)]

pub mod mock_webdriver;

use gridwalk::actions::{Action, ActionClass, Origin};
use gridwalk::dom::StateEmbedding;
use gridwalk::geom::BBox;
use gridwalk::nn::{Activation, Loss, MlpParams, Sample};
use rand::Rng;

/// Every cell of an `n x n` grid over a `w x h` page whose centre lies within
/// 1.5 cell lengths of `(x, y)`, by full enumeration.
pub fn oracle_covered(x: f64, y: f64, n: usize, w: f64, h: f64) -> Vec<(usize, f64)> {
    let (cw, ch) = (w / n as f64, h / n as f64);
    let r = 1.5 * cw.max(ch);
    let mut out = Vec::new();
    for row in 0..n {
        for col in 0..n {
            let cx = (col as f64 + 0.5) * cw;
            let cy = (row as f64 + 0.5) * ch;
            let d = ((cx - x).powi(2) + (cy - y).powi(2)).sqrt();
            if d <= r {
                out.push((row * n + col, d));
            }
        }
    }
    out
}

/// Scalar forward pass: ReLU on hidden layers, identity on the last.
pub fn oracle_forward<T: Copy + Into<f64>>(layers: &[(usize, usize, Vec<T>, Vec<T>)], x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    for (k, (inputs, outputs, w, b)) in layers.iter().enumerate() {
        let mut z = vec![0.0; *outputs];
        for o in 0..*outputs {
            let mut acc: f64 = b[o].into();
            for i in 0..*inputs {
                acc += w[o * inputs + i].into() * a[i];
            }
            z[o] = if k + 1 < layers.len() { acc.max(0.0) } else { acc };
        }
        a = z;
    }
    a
}

pub fn layers_of(p: &MlpParams) -> Vec<(usize, usize, Vec<f32>, Vec<f32>)> {
    p.layers().iter().map(|l| (l.inputs, l.outputs, l.weights.clone(), l.biases.clone())).collect()
}

pub fn layers_of_f64(p: &MlpParams<f64>) -> Vec<(usize, usize, Vec<f64>, Vec<f64>)> {
    p.layers().iter().map(|l| (l.inputs, l.outputs, l.weights.clone(), l.biases.clone())).collect()
}

/// Checks that hidden layers are ReLU and the output layer is linear, which
/// the scalar oracle assumes.
pub fn assert_standard_activations<T>(p: &MlpParams<T>)
where
    T: gridwalk::nn::Scalar,
{
    let n = p.layers().len();
    for (k, l) in p.layers().iter().enumerate() {
        let want = if k + 1 < n { Activation::Relu } else { Activation::Identity };
        assert_eq!(l.activation, want);
    }
}

/// Grid targets by hand: `β·r + γ·max_a' Σ_or_mean next cells`, masked to
/// covered cells.
pub struct TargetCase {
    pub n: usize,
    pub w: f64,
    pub h: f64,
    pub covered: Vec<(usize, f64)>,
    pub reward: f64,
    pub next_centers: Vec<(f64, f64)>,
    pub terminal: bool,
}

pub fn oracle_targets(case: &TargetCase, next_out: &[f64], gamma: f64, mean: bool) -> (Vec<f64>, Vec<bool>) {
    let cells = case.n * case.n;
    let m = if case.terminal || case.next_centers.is_empty() {
        0.0
    } else {
        let mut best = f64::NEG_INFINITY;
        for &(x, y) in &case.next_centers {
            let cov = oracle_covered(x, y, case.n, case.w, case.h);
            let sum: f64 = cov.iter().map(|&(i, _)| next_out[i]).sum();
            let v = if mean { sum / cov.len() as f64 } else { sum };
            if v > best {
                best = v;
            }
        }
        best
    };
    let mut target = vec![0.0; cells];
    let mut mask = vec![false; cells];
    for &(i, beta) in &case.covered {
        target[i] = beta * case.reward + gamma * m;
        mask[i] = true;
    }
    (target, mask)
}

/// Batch loss computed from scratch; mirrors the documented loss semantics.
pub fn oracle_loss(layers: &[(usize, usize, Vec<f64>, Vec<f64>)], batch: &[Sample<f64>], loss: Loss) -> f64 {
    let mut total = 0.0;
    let mut norm = 0.0;
    for s in batch {
        let y = oracle_forward(layers, &s.input);
        match loss {
            Loss::MaskedMse => {
                for j in 0..y.len() {
                    total += s.mask[j] * (y[j] - s.target[j]).powi(2);
                    norm += s.mask[j];
                }
            }
            Loss::SoftmaxCrossEntropy => {
                let live: Vec<usize> = (0..y.len()).filter(|&j| s.mask[j] != 0.0).collect();
                if live.is_empty() {
                    continue;
                }
                norm += 1.0;
                let z: f64 = live.iter().map(|&j| y[j].exp()).sum();
                for &j in &live {
                    total -= s.target[j] * (y[j].exp() / z).ln();
                }
            }
        }
    }
    if norm == 0.0 {
        0.0
    } else {
        total / norm
    }
}

pub fn click_action(locator: &str, x: f64, y: f64) -> Action {
    Action::new(locator, ActionClass::Click, BBox::new(x - 1.0, y - 1.0, 2.0, 2.0), None, Origin::Heuristic)
}

pub fn random_embedding<R: Rng>(dim: usize, rng: &mut R) -> StateEmbedding {
    StateEmbedding { vector: (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect(), hash: rng.gen() }
}

/// `|a - b| <= tol * max(|b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
