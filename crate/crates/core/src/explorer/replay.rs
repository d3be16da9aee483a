use serde::{Deserialize, Serialize};

use super::RecordedStep;
use crate::actions::{Action, Origin};
use crate::env::{reset_with_retry, Environment};
use crate::error::Result;
use crate::geom::BBox;
use crate::grid::hash_hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayStep {
    pub locator: String,
    pub resolved: bool,
    /// Hex hash of the state after the step (absent when unresolved).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
    pub matches_record: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceReplay {
    pub steps: Vec<ReplayStep>,
    pub final_state: String,
    /// Step at which a locator failed to resolve; the rest was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub broken_at: Option<usize>,
    /// First step whose resulting state differs from the recorded one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged_at: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub sequences: Vec<SequenceReplay>,
}

impl ReplayReport {
    pub fn broken(&self) -> usize {
        self.sequences.iter().filter(|s| s.broken_at.is_some()).count()
    }

    pub fn diverged(&self) -> usize {
        self.sequences.iter().filter(|s| s.diverged_at.is_some()).count()
    }
}

/// Runs every sequence from a fresh reset. Environment failures other than
/// stale locators abort the whole replay.
pub fn replay(sequences: &[Vec<RecordedStep>], env: &mut dyn Environment) -> Result<ReplayReport> {
    let mut report = ReplayReport::default();
    for seq in sequences {
        let mut obs = reset_with_retry(env)?;
        let mut out = SequenceReplay { steps: Vec::new(), final_state: String::new(), broken_at: None, diverged_at: None };
        for (i, step) in seq.iter().enumerate() {
            let page = obs.parse();
            let Some(_) = page.tree.find(&step.locator) else {
                out.steps.push(ReplayStep { locator: step.locator.clone(), resolved: false, state: None, matches_record: false });
                out.broken_at = Some(i);
                break;
            };
            let bbox = obs.geometry.get(&step.locator).copied().unwrap_or(BBox::new(0.0, 0.0, 0.0, 0.0));
            let action = Action::new(step.locator.clone(), step.class, bbox, step.payload.clone(), Origin::Heuristic);
            obs = match env.step(&action) {
                Ok(o) => o,
                Err(e) if e.is_recoverable() => {
                    out.steps.push(ReplayStep { locator: step.locator.clone(), resolved: false, state: None, matches_record: false });
                    out.broken_at = Some(i);
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            let state = hash_hex(obs.state_hash());
            let matches_record = state == step.next_state;
            if !matches_record && out.diverged_at.is_none() {
                out.diverged_at = Some(i);
            }
            out.steps.push(ReplayStep { locator: step.locator.clone(), resolved: true, state: Some(state), matches_record });
        }
        out.final_state = hash_hex(obs.state_hash());
        report.sequences.push(out);
    }
    Ok(report)
}
