//! Environment boundary: a reset/step contract, the in-process simulated
//! backend with its fixture apps, a WebDriver adapter, and console failure
//! capture.

mod failure;
mod fixture;
mod http;
mod layout;
mod sim;
mod webdriver;

pub use failure::{failure_signature, FailureLog, FailureRecord, FailureSource, Severity};
pub use fixture::{make_fixture, FixtureKind, FixtureSpec, GroundTruth, SimApp, SIM_ORIGIN, near_duplicate_state};
pub use http::FixtureServer;
pub use layout::{layout, VIEWPORT};
pub use sim::SimEnv;
pub use webdriver::{WebDriverConfig, WebDriverEnv};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::actions::{Action, Geometry};
use crate::dom::{parse_document, simplify, DomTree, SimplifiedDom};
use crate::error::EnvError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsoleLevel {
    Error,
    Warning,
    Info,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsoleEntry {
    pub level: ConsoleLevel,
    pub message: String,
    pub source_url: String,
}

/// One page snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub html: String,
    /// Locator -> box in page coordinates (full scrollable page).
    pub geometry: Geometry,
    pub page_size: (f64, f64),
    /// Console entries emitted since the previous observation.
    pub console: Vec<ConsoleEntry>,
    pub nav_url: String,
}

/// Parsed form of an observation.
#[derive(Clone, Debug)]
pub struct PageState {
    pub tree: DomTree,
    pub simplified: SimplifiedDom,
    pub hash: u64,
}

impl Observation {
    pub fn parse(&self) -> PageState {
        let tree = parse_document(&self.html);
        let simplified = simplify(&tree);
        let hash = simplified.digest();
        PageState { tree, simplified, hash }
    }

    pub fn state_hash(&self) -> u64 {
        self.parse().hash
    }
}

/// Opaque backend checkpoint. Restoring one must be indistinguishable from
/// a reset followed by replaying the actions that led to it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Checkpoint(pub(crate) String);

/// Gym-style contract. One environment is one serial session.
pub trait Environment {
    fn reset(&mut self) -> Result<Observation, EnvError>;

    fn step(&mut self, action: &Action) -> Result<Observation, EnvError>;

    /// Cheap snapshot of the current state, when the backend supports it.
    fn checkpoint(&self) -> Option<Checkpoint> {
        None
    }

    fn restore(&mut self, _checkpoint: &Checkpoint) -> Result<Observation, EnvError> {
        Err(EnvError::Navigation("checkpoints not supported".into()))
    }
}

pub const RESET_ATTEMPTS: usize = 3;

/// Resets with up to [`RESET_ATTEMPTS`] tries; the last error is returned.
pub fn reset_with_retry(env: &mut dyn Environment) -> Result<Observation, EnvError> {
    let mut last = None;
    for attempt in 1..=RESET_ATTEMPTS {
        match env.reset() {
            Ok(obs) => return Ok(obs),
            Err(e) => {
                warn!("reset attempt {attempt}/{RESET_ATTEMPTS} failed: {e}");
                last = Some(e);
            }
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Brings the environment back to the page reached by `path` from a reset.
/// Uses a checkpoint when one is given and supported.
pub fn return_to(
    env: &mut dyn Environment,
    checkpoint: Option<&Checkpoint>,
    path: &[Action],
) -> Result<Observation, EnvError> {
    if let Some(cp) = checkpoint {
        return env.restore(cp);
    }
    let mut obs = reset_with_retry(env)?;
    for a in path {
        obs = match env.step(a) {
            Ok(o) => o,
            Err(e) if e.is_recoverable() => continue,
            Err(e) => return Err(e),
        };
    }
    Ok(obs)
}
