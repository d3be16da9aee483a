use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::actions::{DiscriminatorConfig, InputRule};
use crate::env::{FixtureSpec, WebDriverConfig};
use crate::error::{Error, Result};
use crate::grid::{BetaMode, DqnConfig};
use crate::reward::RewardConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// Grid values, discriminator and mixed reward.
    #[default]
    Full,
    /// Index-based (list) action values.
    Plus,
    /// No probing and no discriminator.
    Minus,
    /// Global novelty only, no episodic term.
    Star,
}

impl AblationVariant {
    pub fn name(self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::Plus => "plus",
            AblationVariant::Minus => "minus",
            AblationVariant::Star => "star",
        }
    }
}

impl std::str::FromStr for AblationVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Self::Full),
            "plus" => Ok(Self::Plus),
            "minus" => Ok(Self::Minus),
            "star" => Ok(Self::Star),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

/// What to explore.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Fixture(FixtureSpec),
    /// A live application driven through WebDriver; `start_url` and
    /// `settle_ms` in the driver block are overridden by the run config.
    Url { start_url: String, webdriver: WebDriverConfig },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub target: Target,
    pub episodes: usize,
    pub steps: usize,
    pub epsilon: f64,
    pub gamma: f64,
    pub grid_n: usize,
    pub state_dim: usize,
    pub seed: u64,
    pub time_budget_secs: Option<f64>,
    pub settle_ms: u64,
    pub input_rules: Vec<InputRule>,
    /// Regexes matched against locators, `href`, `onclick` and form `action`.
    pub deny_list: Vec<String>,
    pub beta_mode: BetaMode,
    /// Use β-weighted sums at selection time instead of plain sums.
    pub weighted_selection: bool,
    pub variant: AblationVariant,
    /// Output width of the list-based value network.
    pub list_width: usize,
    pub probe_cap: usize,
    pub dqn: DqnConfig,
    pub reward: RewardConfig,
    pub discriminator: DiscriminatorConfig,
    /// Stop once every ground-truth state has been seen (fixtures only).
    pub stop_at_full_coverage: bool,
    /// Directory for `trajectory.jsonl` and `report.json`.
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target: Target::Fixture(FixtureSpec::deep_chain(6, 5, 0)),
            episodes: 100,
            steps: 100,
            epsilon: 0.4,
            gamma: 0.95,
            grid_n: 20,
            state_dim: 256,
            seed: 0,
            time_budget_secs: None,
            settle_ms: 2000,
            input_rules: Vec::new(),
            deny_list: Vec::new(),
            beta_mode: BetaMode::Prose,
            weighted_selection: false,
            variant: AblationVariant::Full,
            list_width: 32,
            probe_cap: 30,
            dqn: DqnConfig::default(),
            reward: RewardConfig::default(),
            discriminator: DiscriminatorConfig::default(),
            stop_at_full_coverage: false,
            output_dir: None,
        }
    }
}

impl RunConfig {
    pub fn for_fixture(spec: FixtureSpec) -> Self {
        Self { target: Target::Fixture(spec), ..Self::default() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.steps == 0 {
            return fail("steps must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return fail("epsilon must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail("gamma must lie in [0, 1]");
        }
        if self.grid_n == 0 || self.state_dim == 0 || self.list_width == 0 {
            return fail("grid_n, state_dim and list_width must be positive");
        }
        if self.reward.scale_limit < 1.0 {
            return fail("reward.scale_limit must be at least 1");
        }
        if !(self.reward.tau > 0.0 && self.reward.tau <= 1.0) {
            return fail("reward.tau must lie in (0, 1]");
        }
        let bottleneck = self.reward.bottleneck_for(self.state_dim);
        if bottleneck == 0 || bottleneck >= self.state_dim {
            return fail("reward.bottleneck must be in 1..state_dim");
        }
        if self.reward.feature_dims.is_empty() || self.reward.feature_dims.contains(&0) {
            return fail("reward.feature_dims must list positive widths");
        }
        if self.discriminator.threshold == 0 {
            return fail("discriminator.threshold must be positive");
        }
        for re in &self.deny_list {
            regex::Regex::new(re).map_err(|e| Error::Config(format!("bad deny-list regex {re:?}: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_json() {
        let c = RunConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&text).unwrap(), c);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c: RunConfig = serde_json::from_str(
            r#"{"target": {"fixture": {"kind": "deep_chain", "depth": 3, "branching": 2}}, "episodes": 5}"#,
        )
        .unwrap();
        assert_eq!(c.episodes, 5);
        assert_eq!(c.epsilon, 0.4);
        assert_eq!(c.steps, 100);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let c = RunConfig { epsilon: 1.5, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig { deny_list: vec!["(".into()], ..Default::default() };
        assert!(c.validate().is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
