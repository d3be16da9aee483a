//! Desk-scale comparison suites on the simulated fixtures. Each suite runs
//! two variants over several seeds and reports per-seed outcomes, medians
//! and a pass flag for the expected ordering.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actions::{candidate_leaves, encode_element, ProbeSample, LABEL_NONE};
use crate::dom::{HashingEmbedder, StateEmbedder};
use crate::env::{make_fixture, near_duplicate_state, FixtureSpec, SimEnv};
use crate::error::Result;
use crate::explorer::{AblationVariant, Explorer, RunConfig};
use crate::grid::{covered_with_betas, Dqn, GridSpec, Transition, ValueHead};
use crate::rng::stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Deepchain,
    Misalignment,
    Hidden,
    Reward,
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deepchain" => Ok(Self::Deepchain),
            "misalignment" => Ok(Self::Misalignment),
            "hidden" => Ok(Self::Hidden),
            "reward" => Ok(Self::Reward),
            other => Err(crate::Error::Config(format!("unknown suite {other:?}"))),
        }
    }
}

/// Median of a non-empty list; the mean of the middle pair for even sizes.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// `deep_chain(6, 5)` with 30 steps and 200 episodes.
pub fn deepchain_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::for_fixture(FixtureSpec::deep_chain(6, 5, seed));
    c.seed = seed;
    c.episodes = 200;
    c.steps = 30;
    c.stop_at_full_coverage = true;
    c
}

/// Uniform-random baseline: ε = 1 and no learning or probing, which cannot
/// influence a policy that never reads its values.
pub fn random_baseline(mut c: RunConfig) -> RunConfig {
    c.epsilon = 1.0;
    c.variant = AblationVariant::Minus;
    c.dqn.updates_per_episode = 0;
    c.reward.ae_steps = 0;
    c
}

pub fn misalignment_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::for_fixture(FixtureSpec::near_duplicate(4, 4, seed));
    c.seed = seed;
    c.episodes = 150;
    c.steps = 30;
    c.stop_at_full_coverage = true;
    c
}

pub fn hidden_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::for_fixture(FixtureSpec::hidden_action(10, seed));
    c.seed = seed;
    c.episodes = 40;
    c.steps = 20;
    c
}

pub fn reward_config(seed: u64) -> RunConfig {
    let mut c = RunConfig::for_fixture(FixtureSpec::wide(3, 5, seed));
    c.seed = seed;
    c.episodes = 60;
    c.steps = 20;
    c.stop_at_full_coverage = true;
    c
}

fn run(config: &RunConfig) -> Result<(crate::explorer::RunReport, Explorer)> {
    let Some(spec) = fixture_of(config) else {
        return Err(crate::Error::Config("bench suites need a fixture target".into()));
    };
    let (app, truth) = make_fixture(&spec)?;
    let mut env = SimEnv::new(Arc::new(app));
    let mut explorer = Explorer::new(config.clone())?;
    let report = explorer.run(&mut env, Some(&truth), &mut std::io::sink())?;
    Ok((report, explorer))
}

fn fixture_of(config: &RunConfig) -> Option<FixtureSpec> {
    match &config.target {
        crate::explorer::Target::Fixture(spec) => Some(spec.clone()),
        crate::explorer::Target::Url { .. } => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepChainRow {
    pub seed: u64,
    pub full_terminal_episode: Option<usize>,
    pub random_terminal_episode: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeepChainTable {
    pub rows: Vec<DeepChainRow>,
    pub full_successes: usize,
    pub random_successes: usize,
    pub passed: bool,
}

pub fn deepchain(seeds: &[u64]) -> Result<DeepChainTable> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let config = deepchain_config(seed);
        let (full, _) = run(&config)?;
        let (random, _) = run(&random_baseline(config))?;
        rows.push(DeepChainRow {
            seed,
            full_terminal_episode: full.terminal_episode,
            random_terminal_episode: random.terminal_episode,
        });
    }
    let full_successes = rows.iter().filter(|r| r.full_terminal_episode.is_some()).count();
    let random_successes = rows.iter().filter(|r| r.random_terminal_episode.is_some()).count();
    let n = seeds.len();
    let passed = 5 * full_successes >= 4 * n && 5 * random_successes <= n;
    Ok(DeepChainTable { rows, full_successes, random_successes, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentRow {
    pub seed: u64,
    /// Episodes until every state was seen; the episode budget plus one when
    /// coverage was never completed.
    pub full_episodes: usize,
    pub plus_episodes: usize,
}

/// Greedy choices on the banner and bannerless versions of one page under
/// value networks trained on bannerless pages only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCheck {
    pub level: usize,
    pub correct_locator: String,
    pub full_bannerless: String,
    pub full_banner: String,
    pub plus_bannerless_index: usize,
    pub plus_banner_index: usize,
    pub plus_banner: String,
    pub full_aligned: bool,
    pub plus_shifted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisalignmentTable {
    pub rows: Vec<MisalignmentRow>,
    pub full_median: f64,
    pub plus_median: f64,
    pub alignment: AlignmentCheck,
    pub passed: bool,
}

pub fn misalignment(seeds: &[u64]) -> Result<MisalignmentTable> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let config = misalignment_config(seed);
        let budget = config.episodes + 1;
        let (full, _) = run(&config)?;
        let (plus, _) = run(&RunConfig { variant: AblationVariant::Plus, ..config })?;
        rows.push(MisalignmentRow {
            seed,
            full_episodes: full.full_coverage_episode.unwrap_or(budget),
            plus_episodes: plus.full_coverage_episode.unwrap_or(budget),
        });
    }
    let full_median = median(&rows.iter().map(|r| r.full_episodes as f64).collect::<Vec<_>>());
    let plus_median = median(&rows.iter().map(|r| r.plus_episodes as f64).collect::<Vec<_>>());
    let alignment = alignment_check(seeds.first().copied().unwrap_or(0))?;
    let passed = full_median <= plus_median && alignment.full_aligned && alignment.plus_shifted;
    Ok(MisalignmentTable { rows, full_median, plus_median, alignment, passed })
}

/// Trains a grid head and a list head on the bannerless pages of a
/// `near_duplicate` fixture (reward 1 for the correct button, 0 otherwise,
/// terminal transitions), then compares greedy choices on the banner page of
/// the middle level.
pub fn alignment_check(seed: u64) -> Result<AlignmentCheck> {
    let config = misalignment_config(seed);
    let spec = fixture_of(&config).expect("fixture target");
    let depth = match spec.kind {
        crate::env::FixtureKind::NearDuplicate { depth, .. } => depth,
        _ => unreachable!("misalignment suite uses near_duplicate"),
    };
    let (app, truth) = make_fixture(&spec)?;
    let embedder = HashingEmbedder::new(config.state_dim);
    let mut gen = crate::actions::InputGenerator::new(&[], stream(seed, "alignment/input"))?;
    let page_actions = |id: usize, gen: &mut crate::actions::InputGenerator| {
        let page = &app.pages[id];
        let actions = crate::actions::recognize_heuristic(&page.tree, &page.geometry, page.page_size, gen);
        let s = embedder.embed(&crate::dom::simplify(&page.tree));
        let grid = GridSpec::new(config.grid_n, page.page_size.0, page.page_size.1).expect("valid page");
        (s, actions, grid)
    };

    let correct_locator = |level: usize, banner: bool| {
        let tail = truth.success_path[level].rsplit('/').next().expect("button step").to_string();
        let container = if banner { "/html[1]/body[1]/div[3]" } else { "/html[1]/body[1]/div[2]" };
        format!("{container}/{tail}")
    };

    let mut transitions = Vec::new();
    for level in 0..depth {
        let (s, actions, grid) = page_actions(near_duplicate_state(level, false), &mut gen);
        let good = correct_locator(level, false);
        for (index, a) in actions.iter().enumerate() {
            let reward = if a.locator == good { 1.0 } else { 0.0 };
            transitions.push(Transition {
                s: s.clone(),
                grid,
                action: a.clone(),
                action_index: index,
                covered: covered_with_betas(a.center, &grid, config.beta_mode)?,
                reward,
                s_next: s.clone(),
                next_grid: grid,
                next_actions: Vec::new(),
                terminal: true,
            });
        }
    }
    let train = |head: ValueHead, name: &str| -> Result<Dqn> {
        let mut dqn_config = config.dqn.clone();
        dqn_config.learning_rate = 1e-3;
        let mut dqn = Dqn::new(config.state_dim, head, dqn_config, &mut stream(seed, name))?;
        let batch: Vec<&Transition> = transitions.iter().collect();
        for _ in 0..400 {
            dqn.update(&batch, config.gamma)?;
        }
        Ok(dqn)
    };
    let grid_dqn = train(ValueHead::Grid { n: config.grid_n }, "alignment/grid")?;
    let list_dqn = train(ValueHead::List { width: config.list_width }, "alignment/list")?;

    let level = depth / 2;
    let greedy = |dqn: &Dqn, id: usize, gen: &mut crate::actions::InputGenerator| -> Result<(usize, String)> {
        let (s, actions, grid) = page_actions(id, gen);
        let values = dqn.action_values(&s, &actions, &grid)?;
        let i = crate::grid::argmax(&values);
        Ok((i, actions[i].locator.clone()))
    };
    let (_, full_bannerless) = greedy(&grid_dqn, near_duplicate_state(level, false), &mut gen)?;
    let (_, full_banner) = greedy(&grid_dqn, near_duplicate_state(level, true), &mut gen)?;
    let (plus_bannerless_index, plus_bannerless) = greedy(&list_dqn, near_duplicate_state(level, false), &mut gen)?;
    let (plus_banner_index, plus_banner) = greedy(&list_dqn, near_duplicate_state(level, true), &mut gen)?;

    let same_button = |a: &str, b: &str| a.rsplit('/').next() == b.rsplit('/').next();
    let full_aligned = full_bannerless == correct_locator(level, false) && full_banner == correct_locator(level, true);
    let plus_shifted = plus_bannerless == correct_locator(level, false)
        && plus_banner_index == plus_bannerless_index
        && !same_button(&plus_banner, &plus_bannerless);
    Ok(AlignmentCheck {
        level,
        correct_locator: correct_locator(level, false),
        full_bannerless,
        full_banner,
        plus_bannerless_index,
        plus_banner_index,
        plus_banner,
        full_aligned,
        plus_shifted,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenRow {
    pub seed: u64,
    pub full_coverage: usize,
    pub minus_coverage: usize,
    pub phase_switch_episode: Option<usize>,
    /// Discriminator accuracy on a freshly generated fixture's candidate
    /// elements, against ground-truth labels.
    pub heldout_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenTable {
    pub rows: Vec<HiddenRow>,
    pub full_median: f64,
    pub minus_median: f64,
    pub min_accuracy: f64,
    pub passed: bool,
}

/// Ground-truth labelled candidate elements of the start page of
/// `hidden_action(10, seed)`.
pub fn heldout_samples(seed: u64, element_dim: usize) -> Result<Vec<ProbeSample>> {
    let (app, truth) = make_fixture(&FixtureSpec::hidden_action(10, seed))?;
    let page = &app.pages[app.start];
    let mut out = Vec::new();
    for (el, _) in candidate_leaves(&page.tree, &page.geometry, page.page_size) {
        let label = truth
            .hidden_labels
            .iter()
            .find(|(state, loc, _)| *state == app.start && *loc == el.locator)
            .map_or(LABEL_NONE, |l| l.2);
        out.push(ProbeSample { element: encode_element(el.node, &el.ancestors, element_dim), label, episode: 0 });
    }
    Ok(out)
}

pub fn hidden(seeds: &[u64]) -> Result<HiddenTable> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let config = hidden_config(seed);
        let (full, explorer) = run(&config)?;
        let (minus, _) = run(&RunConfig { variant: AblationVariant::Minus, ..config.clone() })?;
        let disc = explorer.discriminator().expect("full variant keeps a discriminator");
        let heldout = heldout_samples(seed + 1000, config.discriminator.element_dim)?;
        let heldout_accuracy = if disc.is_assisted() { disc.accuracy(&heldout)? } else { 0.0 };
        rows.push(HiddenRow {
            seed,
            full_coverage: full.coverage().unwrap_or(0),
            minus_coverage: minus.coverage().unwrap_or(0),
            phase_switch_episode: full.phase_switch_episode,
            heldout_accuracy,
        });
    }
    let full_median = median(&rows.iter().map(|r| r.full_coverage as f64).collect::<Vec<_>>());
    let minus_median = median(&rows.iter().map(|r| r.minus_coverage as f64).collect::<Vec<_>>());
    let min_accuracy = rows.iter().map(|r| r.heldout_accuracy).fold(f64::INFINITY, f64::min);
    let passed = full_median > minus_median && min_accuracy >= 0.9;
    Ok(HiddenTable { rows, full_median, minus_median, min_accuracy, passed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardRow {
    pub seed: u64,
    pub full_coverage: usize,
    pub star_coverage: usize,
    /// Within-episode revisits in the star run whose reward differs from the
    /// state's first-visit reward in that episode.
    pub star_decayed_revisits: usize,
    pub star_revisits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    pub rows: Vec<RewardRow>,
    pub full_median: f64,
    pub star_median: f64,
    pub passed: bool,
}

pub fn reward(seeds: &[u64]) -> Result<RewardTable> {
    let mut rows = Vec::new();
    for &seed in seeds {
        let config = reward_config(seed);
        let (full, _) = run(&config)?;
        let (star, _) = run(&RunConfig { variant: AblationVariant::Star, ..config })?;
        let (mut revisits, mut decayed) = (0, 0);
        for (seq, trace) in star.sequences.iter().zip(&star.reward_traces) {
            let mut first: std::collections::HashMap<&str, f64> = std::collections::HashMap::new();
            for (step, point) in seq.iter().zip(trace) {
                match first.get(step.next_state.as_str()) {
                    Some(&r0) => {
                        revisits += 1;
                        // the global factor moves only between episodes
                        if point.total != r0 {
                            decayed += 1;
                        }
                    }
                    None => {
                        first.insert(step.next_state.as_str(), point.total);
                    }
                }
            }
        }
        rows.push(RewardRow {
            seed,
            full_coverage: full.coverage().unwrap_or(0),
            star_coverage: star.coverage().unwrap_or(0),
            star_decayed_revisits: decayed,
            star_revisits: revisits,
        });
    }
    let full_median = median(&rows.iter().map(|r| r.full_coverage as f64).collect::<Vec<_>>());
    let star_median = median(&rows.iter().map(|r| r.star_coverage as f64).collect::<Vec<_>>());
    let passed = full_median >= star_median && rows.iter().all(|r| r.star_decayed_revisits == 0);
    Ok(RewardTable { rows, full_median, star_median, passed })
}

/// Any suite's table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "suite", rename_all = "snake_case")]
pub enum BenchTable {
    Deepchain(DeepChainTable),
    Misalignment(MisalignmentTable),
    Hidden(HiddenTable),
    Reward(RewardTable),
}

impl BenchTable {
    pub fn passed(&self) -> bool {
        match self {
            BenchTable::Deepchain(t) => t.passed,
            BenchTable::Misalignment(t) => t.passed,
            BenchTable::Hidden(t) => t.passed,
            BenchTable::Reward(t) => t.passed,
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let mark = if self.passed() { "PASS" } else { "FAIL" };
        let ep = |e: Option<usize>| e.map_or("-".to_string(), |e| e.to_string());
        match self {
            BenchTable::Deepchain(t) => {
                let _ = writeln!(s, "deepchain: terminal-reaching episode per seed (full vs uniform random)");
                for r in &t.rows {
                    let _ = writeln!(s, "  seed {:>3}  full {:>4}  random {:>4}", r.seed, ep(r.full_terminal_episode), ep(r.random_terminal_episode));
                }
                let _ = writeln!(s, "  successes: full {}/{}  random {}/{}  [{mark}]", t.full_successes, t.rows.len(), t.random_successes, t.rows.len());
            }
            BenchTable::Misalignment(t) => {
                let _ = writeln!(s, "misalignment: episodes to full state coverage (grid vs list)");
                for r in &t.rows {
                    let _ = writeln!(s, "  seed {:>3}  full {:>4}  plus {:>4}", r.seed, r.full_episodes, r.plus_episodes);
                }
                let a = &t.alignment;
                let _ = writeln!(s, "  median: full {:.1}  plus {:.1}", t.full_median, t.plus_median);
                let _ = writeln!(
                    s,
                    "  alignment at level {}: grid {} -> {} (aligned {}), list index {} -> {} picks {} (shifted {})  [{mark}]",
                    a.level, a.full_bannerless, a.full_banner, a.full_aligned, a.plus_bannerless_index, a.plus_banner_index, a.plus_banner, a.plus_shifted
                );
            }
            BenchTable::Hidden(t) => {
                let _ = writeln!(s, "hidden: distinct fixture states covered (full vs minus)");
                for r in &t.rows {
                    let _ = writeln!(
                        s,
                        "  seed {:>3}  full {:>3}  minus {:>3}  switch {:>4}  held-out accuracy {:.3}",
                        r.seed, r.full_coverage, r.minus_coverage, ep(r.phase_switch_episode), r.heldout_accuracy
                    );
                }
                let _ = writeln!(s, "  median: full {:.1}  minus {:.1}  min accuracy {:.3}  [{mark}]", t.full_median, t.minus_median, t.min_accuracy);
            }
            BenchTable::Reward(t) => {
                let _ = writeln!(s, "reward: distinct fixture states covered (full vs star)");
                for r in &t.rows {
                    let _ = writeln!(
                        s,
                        "  seed {:>3}  full {:>3}  star {:>3}  star revisits {} (decayed {})",
                        r.seed, r.full_coverage, r.star_coverage, r.star_revisits, r.star_decayed_revisits
                    );
                }
                let _ = writeln!(s, "  median: full {:.1}  star {:.1}  [{mark}]", t.full_median, t.star_median);
            }
        }
        s
    }
}

pub fn run_suite(suite: Suite, seeds: &[u64]) -> Result<BenchTable> {
    Ok(match suite {
        Suite::Deepchain => BenchTable::Deepchain(deepchain(seeds)?),
        Suite::Misalignment => BenchTable::Misalignment(misalignment(seeds)?),
        Suite::Hidden => BenchTable::Hidden(hidden(seeds)?),
        Suite::Reward => BenchTable::Reward(reward(seeds)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn heldout_samples_cover_all_labels() {
        let s = heldout_samples(5, 64).unwrap();
        for label in 0..=2u8 {
            assert!(s.iter().any(|x| x.label == label), "missing label {label}");
        }
    }
}
