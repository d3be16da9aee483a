//! Index-based action values: output `j` of the network is the value of the
//! `j`-th action in document order. Used by the list-space ablation.

use super::Transition;
use crate::error::{contract, Result};
use crate::nn::MlpParams;

/// Values of the first `min(n_actions, outputs.len())` actions. Actions past
/// the network's width get `-inf` so they are never chosen greedily.
pub fn list_values(outputs: &[f32], n_actions: usize) -> Vec<f64> {
    (0..n_actions).map(|j| outputs.get(j).map_or(f64::NEG_INFINITY, |&v| v as f64)).collect()
}

pub(crate) fn list_max(outputs: &[f32], n_actions: usize) -> f64 {
    outputs.iter().take(n_actions).map(|&v| v as f64).fold(f64::NEG_INFINITY, f64::max)
}

/// Target `r + γ·max_j' Q(s', j')` on the taken index only.
pub fn make_list_targets(t: &Transition, target_net: &MlpParams, gamma: f64) -> Result<(Vec<f32>, Vec<f32>)> {
    let next = if t.terminal || t.next_actions.is_empty() { None } else { Some(target_net.forward(&t.s_next.vector)?) };
    list_targets_from(t, next.as_deref(), target_net.output_dim(), gamma)
}

pub(crate) fn list_targets_from(
    t: &Transition,
    next_out: Option<&[f32]>,
    width: usize,
    gamma: f64,
) -> Result<(Vec<f32>, Vec<f32>)> {
    if t.action_index >= width {
        return Err(contract(format!("action index {} beyond list width {width}", t.action_index)));
    }
    let m = match next_out {
        Some(out) if !t.terminal && !t.next_actions.is_empty() => list_max(out, t.next_actions.len()),
        _ => 0.0,
    };
    let mut target = vec![0.0f32; width];
    let mut mask = vec![0.0f32; width];
    target[t.action_index] = (t.reward + gamma * m) as f32;
    mask[t.action_index] = 1.0;
    Ok((target, mask))
}
