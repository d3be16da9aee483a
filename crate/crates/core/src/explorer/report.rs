use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use super::AblationVariant;
use crate::actions::{ActionClass, Payload};
use crate::env::FailureRecord;
use crate::error::{Error, Result};
use crate::grid::TrajectoryRecord;

/// One executed action of an output sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordedStep {
    pub locator: String,
    pub class: ActionClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    /// Hex state hash before and after the action.
    pub state: String,
    pub next_state: String,
}

impl From<&TrajectoryRecord> for RecordedStep {
    fn from(r: &TrajectoryRecord) -> Self {
        Self {
            locator: r.locator.clone(),
            class: r.class,
            payload: r.payload.clone(),
            state: r.state.clone(),
            next_state: r.next_state.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    Steps,
    DeadEnd,
    Budget,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    /// 1-based.
    pub episode: usize,
    pub steps: usize,
    pub end: EpisodeEnd,
    pub distinct_states: usize,
    pub cumulative_states: usize,
    /// Ground-truth states seen so far (fixtures only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<usize>,
    pub assisted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dqn_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ae_loss: Option<f64>,
    pub probe_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardPoint {
    pub r_ep: f64,
    pub alpha: f64,
    pub total: f64,
}

/// Wall-clock seconds per phase of the loop.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub environment: f64,
    pub represent: f64,
    pub recognize: f64,
    pub value: f64,
    pub reward: f64,
    pub learn: f64,
    pub probe: f64,
    pub discriminator: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub variant: AblationVariant,
    pub seed: u64,
    /// Stopped early by the time budget or an environment failure.
    pub partial: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abort_reason: Option<String>,
    /// Executed action sequence of every completed episode.
    pub sequences: Vec<Vec<RecordedStep>>,
    pub episodes: Vec<EpisodeSummary>,
    pub distinct_states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_count: Option<usize>,
    /// First episode (1-based) after which every ground-truth state was seen.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_coverage_episode: Option<usize>,
    /// First episode (1-based) that reached the fixture's terminal state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal_episode: Option<usize>,
    pub failures: Vec<FailureRecord>,
    pub reward_traces: Vec<Vec<RewardPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_switch_episode: Option<usize>,
    pub discriminator_samples: usize,
    pub timings: PhaseTimings,
}

impl RunReport {
    pub fn completed_episodes(&self) -> usize {
        self.sequences.len()
    }

    /// Ground-truth coverage after the last episode.
    pub fn coverage(&self) -> Option<usize> {
        self.episodes.last().and_then(|e| e.coverage)
    }

    /// Rebuilds the log-derived parts of a report from trajectory JSONL.
    pub fn from_trajectory<R: BufRead>(reader: R) -> Result<Self> {
        let mut by_episode: BTreeMap<usize, Vec<TrajectoryRecord>> = BTreeMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrajectoryRecord =
                serde_json::from_str(&line).map_err(|e| Error::Config(format!("trajectory line {}: {e}", i + 1)))?;
            by_episode.entry(rec.episode).or_default().push(rec);
        }
        let mut report = RunReport::default();
        let mut seen = BTreeSet::new();
        for (episode, mut records) in by_episode {
            records.sort_by_key(|r| r.step);
            let mut local = BTreeSet::new();
            for r in &records {
                local.insert(r.next_state.clone());
                seen.insert(r.next_state.clone());
            }
            report.sequences.push(records.iter().map(RecordedStep::from).collect());
            report
                .reward_traces
                .push(records.iter().map(|r| RewardPoint { r_ep: r.r_ep, alpha: r.alpha, total: r.reward }).collect());
            report.episodes.push(EpisodeSummary {
                episode,
                steps: records.len(),
                end: if records.last().is_some_and(|r| r.terminal) { EpisodeEnd::DeadEnd } else { EpisodeEnd::Steps },
                distinct_states: local.len(),
                cumulative_states: seen.len(),
                coverage: None,
                assisted: false,
                dqn_loss: None,
                ae_loss: None,
                probe_samples: 0,
            });
        }
        report.distinct_states = seen.len();
        Ok(report)
    }
}
