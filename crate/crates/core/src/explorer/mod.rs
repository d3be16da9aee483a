//! The exploration loop: represent the page, recognise actions, value them
//! on the grid, act ε-greedily, reward curiosity, and learn at episode end.

mod config;
mod replay;
mod report;

pub use config::{AblationVariant, RunConfig, Target};
pub use replay::{replay, ReplayReport, ReplayStep, SequenceReplay};
pub use report::{EpisodeEnd, EpisodeSummary, PhaseTimings, RecordedStep, RewardPoint, RunReport};

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::rc::Rc;
use std::sync::Arc;
use std::time::Instant;

use log::{info, warn};
use regex::Regex;
use xxhash_rust::xxh3::xxh3_64;

use crate::actions::{
    candidate_leaves, encode_element, probe_page, recognize_heuristic, Action, ActionClass, DiscriminatorState,
    InputGenerator, Origin, ProbeRound, ProbeSample, LABEL_CLICK, LABEL_DBCLICK, LABEL_NONE,
};
use crate::dom::{parse_document, simplify, DomTree, HashingEmbedder, StateEmbedder, StateEmbedding};
use crate::env::{
    make_fixture, reset_with_retry, Environment, FailureLog, GroundTruth, Observation, SimEnv, WebDriverEnv,
};
use crate::error::{Error, Result};
use crate::geom::BBox;
use crate::grid::{
    covered_with_betas, hash_hex, select_action, weighted_action_values, Dqn, GridSpec, ReplayStore, TrajectoryRecord,
    Transition, ValueHead,
};
use crate::reward::{episodic_reward, global_multiplier, mix, EpisodeBuffer, RewardModelState};
use crate::rng::{stream, RunRng};

/// Origin used to tell application errors from third-party ones.
fn target_origin(config: &RunConfig) -> String {
    match &config.target {
        Target::Fixture(_) => crate::env::SIM_ORIGIN.to_string(),
        Target::Url { start_url, .. } => origin_of(start_url),
    }
}

fn origin_of(url: &str) -> String {
    let Some(scheme_end) = url.find("://") else { return url.to_string() };
    let rest = &url[scheme_end + 3..];
    let host_end = rest.find('/').unwrap_or(rest.len());
    url[..scheme_end + 3 + host_end].to_string()
}

struct Parsed {
    tree: DomTree,
    embedding: StateEmbedding,
    html_key: u64,
}

/// Mutable learning state of one run.
pub struct Explorer {
    config: RunConfig,
    embedder: HashingEmbedder,
    dqn: Dqn,
    reward: RewardModelState,
    disc: Option<DiscriminatorState>,
    disc_version: u64,
    round: ProbeRound,
    replay_store: ReplayStore,
    inputs: InputGenerator,
    select_rng: RunRng,
    train_rng: RunRng,
    disc_rng: RunRng,
    deny: Vec<Regex>,
    pages: HashMap<u64, Rc<Parsed>>,
    disc_cache: HashMap<u64, Rc<Vec<(String, ActionClass, BBox)>>>,
}

impl Explorer {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let head = match config.variant {
            AblationVariant::Plus => ValueHead::List { width: config.list_width },
            _ => ValueHead::Grid { n: config.grid_n },
        };
        let dqn = Dqn::new(config.state_dim, head, config.dqn.clone(), &mut stream(seed, "dqn-init"))?;
        let reward = RewardModelState::new(config.state_dim, &config.reward, &mut stream(seed, "reward-init"))?;
        let disc = match config.variant {
            AblationVariant::Minus => None,
            _ => Some(DiscriminatorState::new(config.discriminator.clone(), &mut stream(seed, "disc-init"))?),
        };
        let deny = config.deny_list.iter().map(|r| Regex::new(r)).collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(Self {
            embedder: HashingEmbedder::new(config.state_dim),
            inputs: InputGenerator::new(&config.input_rules, stream(seed, "input"))?,
            round: ProbeRound::new(config.probe_cap),
            replay_store: ReplayStore::new(config.dqn.replay_capacity),
            select_rng: stream(seed, "select"),
            train_rng: stream(seed, "dqn-train"),
            disc_rng: stream(seed, "disc-train"),
            dqn,
            reward,
            disc,
            disc_version: 0,
            deny,
            pages: HashMap::new(),
            disc_cache: HashMap::new(),
            config,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn dqn(&self) -> &Dqn {
        &self.dqn
    }

    pub fn discriminator(&self) -> Option<&DiscriminatorState> {
        self.disc.as_ref()
    }

    pub fn reward_model(&self) -> &RewardModelState {
        &self.reward
    }

    pub fn replay_store(&self) -> &ReplayStore {
        &self.replay_store
    }

    fn parse(&mut self, obs: &Observation) -> Rc<Parsed> {
        let key = xxh3_64(obs.html.as_bytes());
        if let Some(p) = self.pages.get(&key) {
            return Rc::clone(p);
        }
        let tree = parse_document(&obs.html);
        let embedding = self.embedder.embed(&simplify(&tree));
        let parsed = Rc::new(Parsed { tree, embedding, html_key: key });
        self.pages.insert(key, Rc::clone(&parsed));
        parsed
    }

    fn denied(&self, page: &Parsed, locator: &str) -> bool {
        if self.deny.is_empty() {
            return false;
        }
        let node = page.tree.find(locator);
        let fields = ["href", "onclick", "ondblclick", "action"];
        self.deny.iter().any(|re| {
            re.is_match(locator)
                || node.is_some_and(|n| fields.iter().filter_map(|f| n.get_attr(f)).any(|v| re.is_match(v)))
        })
    }

    /// Heuristic actions, plus discriminator proposals once assisted. The
    /// list-based variant sees at most `list_width` actions.
    fn recognize(&mut self, page: &Parsed, obs: &Observation) -> Result<Vec<Action>> {
        let mut actions = recognize_heuristic(&page.tree, &obs.geometry, obs.page_size, &mut self.inputs);
        if let Some(disc) = self.disc.as_ref().filter(|d| d.is_assisted()) {
            let key = page.html_key ^ self.disc_version.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let labelled = match self.disc_cache.get(&key) {
                Some(l) => Rc::clone(l),
                None => {
                    let mut out = Vec::new();
                    for (el, bbox) in candidate_leaves(&page.tree, &obs.geometry, obs.page_size) {
                        let emb = encode_element(el.node, &el.ancestors, disc.config.element_dim);
                        match disc.predict(&emb)? {
                            LABEL_CLICK => out.push((el.locator.clone(), ActionClass::Click, bbox)),
                            LABEL_DBCLICK => out.push((el.locator.clone(), ActionClass::Dbclick, bbox)),
                            _ => {}
                        }
                    }
                    let out = Rc::new(out);
                    self.disc_cache.insert(key, Rc::clone(&out));
                    out
                }
            };
            for (locator, class, bbox) in labelled.iter() {
                actions.push(Action::new(locator.clone(), *class, *bbox, None, Origin::Discriminator));
            }
        }
        if !self.deny.is_empty() {
            actions.retain(|a| !self.denied(page, &a.locator));
        }
        if self.config.variant == AblationVariant::Plus {
            actions.truncate(self.config.list_width);
        }
        Ok(actions)
    }

    fn values(&self, s: &StateEmbedding, actions: &[Action], grid: &GridSpec) -> Result<Vec<f64>> {
        if self.config.weighted_selection && self.config.variant != AblationVariant::Plus {
            let out = self.dqn.online.forward(&s.vector)?;
            let map = crate::grid::GridValueMap { n: grid.n, values: out, produced_for: s.hash };
            return weighted_action_values(&map, actions, grid, self.config.beta_mode);
        }
        self.dqn.action_values(s, actions, grid)
    }

    fn total_reward(&self, r_ep: f64, alpha: f64) -> f64 {
        let limit = self.config.reward.scale_limit;
        match self.config.variant {
            AblationVariant::Star => global_multiplier(alpha, limit),
            _ => mix(r_ep, alpha, limit),
        }
    }

    /// Runs up to `config.episodes` episodes. Trajectory records are written
    /// to `log` as JSON lines, one episode at a time.
    pub fn run(&mut self, env: &mut dyn Environment, truth: Option<&GroundTruth>, log: &mut dyn Write) -> Result<RunReport> {
        let started = Instant::now();
        let mut report = RunReport {
            variant: self.config.variant,
            seed: self.config.seed,
            state_count: truth.map(|t| t.state_count),
            ..Default::default()
        };
        let mut failures = FailureLog::new(target_origin(&self.config));
        let mut seen: BTreeSet<u64> = BTreeSet::new();
        let mut covered_states: BTreeSet<usize> = BTreeSet::new();
        let mut t = PhaseTimings::default();
        let budget = self.config.time_budget_secs;
        let budget_hit = |started: &Instant| budget.is_some_and(|b| started.elapsed().as_secs_f64() >= b);

        'episodes: for episode in 1..=self.config.episodes {
            if budget_hit(&started) {
                report.partial = true;
                report.abort_reason = Some("time budget exhausted".into());
                break;
            }
            let clock = Instant::now();
            let mut obs = match reset_with_retry(env) {
                Ok(o) => o,
                Err(e) => {
                    report.partial = true;
                    report.abort_reason = Some(format!("reset failed: {e}"));
                    break;
                }
            };
            t.environment += clock.elapsed().as_secs_f64();
            failures.observe(&obs.console, episode, 0);

            let clock = Instant::now();
            let mut page = self.parse(&obs);
            t.represent += clock.elapsed().as_secs_f64();
            let clock = Instant::now();
            let mut actions = self.recognize(&page, &obs)?;
            t.recognize += clock.elapsed().as_secs_f64();
            seen.insert(page.embedding.hash);
            if let Some(id) = truth.and_then(|g| g.state_of(page.embedding.hash)) {
                covered_states.insert(id);
            }

            let mut buffer = EpisodeBuffer::new(self.config.reward.tau);
            let mut taken: Vec<Action> = Vec::new();
            let mut transitions: Vec<Transition> = Vec::new();
            let mut records: Vec<TrajectoryRecord> = Vec::new();
            let mut trace: Vec<RewardPoint> = Vec::new();
            let mut visited_states: Vec<StateEmbedding> = Vec::new();
            let mut local: BTreeSet<u64> = BTreeSet::from([page.embedding.hash]);
            let mut end = EpisodeEnd::Steps;
            let mut aborted = None;

            for step in 0..self.config.steps {
                if step > 0 && budget_hit(&started) {
                    end = EpisodeEnd::Budget;
                    break;
                }
                if actions.is_empty() {
                    if let (Some(tr), Some(rec)) = (transitions.last_mut(), records.last_mut()) {
                        tr.terminal = true;
                        rec.terminal = true;
                    }
                    end = EpisodeEnd::DeadEnd;
                    break;
                }
                let clock = Instant::now();
                let grid = GridSpec::new(self.config.grid_n, obs.page_size.0, obs.page_size.1)?;
                let values = self.values(&page.embedding, &actions, &grid)?;
                let index = select_action(&values, self.config.epsilon, &mut self.select_rng)?
                    .expect("non-empty action list");
                t.value += clock.elapsed().as_secs_f64();
                let action = actions[index].clone();

                let clock = Instant::now();
                let next_obs = match env.step(&action) {
                    Ok(o) => o,
                    Err(e) if e.is_recoverable() => {
                        warn!("episode {episode} step {step}: {e}; treated as a no-op");
                        Observation { console: Vec::new(), ..obs.clone() }
                    }
                    Err(e) => {
                        aborted = Some(format!("environment failure at episode {episode} step {step}: {e}"));
                        break;
                    }
                };
                t.environment += clock.elapsed().as_secs_f64();
                taken.push(action.clone());
                failures.observe(&next_obs.console, episode, step + 1);

                let clock = Instant::now();
                let next_page = self.parse(&next_obs);
                t.represent += clock.elapsed().as_secs_f64();

                if action.origin == Origin::Discriminator {
                    if let Some(el) = page.tree.resolve(&action.locator) {
                        let disc = self.disc.as_mut().expect("discriminator proposals imply a discriminator");
                        let label = match (next_page.embedding.hash != page.embedding.hash, action.class) {
                            (false, _) => LABEL_NONE,
                            (true, ActionClass::Dbclick) => LABEL_DBCLICK,
                            (true, _) => LABEL_CLICK,
                        };
                        let element = encode_element(el.node, &el.ancestors, disc.config.element_dim);
                        disc.record(ProbeSample { element, label, episode });
                    }
                }

                let clock = Instant::now();
                let features = self.reward.features(&next_page.embedding)?;
                buffer.push(features);
                let r_ep = episodic_reward(&buffer, buffer.features.last().expect("just pushed"))?;
                let alpha = self.reward.global_factor(&next_page.embedding)?;
                let total = self.total_reward(r_ep, alpha);
                t.reward += clock.elapsed().as_secs_f64();
                debug_assert_eq!(buffer.len(), step + 1);

                let clock = Instant::now();
                let next_actions = self.recognize(&next_page, &next_obs)?;
                t.recognize += clock.elapsed().as_secs_f64();
                let next_grid = GridSpec::new(self.config.grid_n, next_obs.page_size.0, next_obs.page_size.1)?;
                let covered = covered_with_betas(action.center, &grid, self.config.beta_mode)?;

                records.push(TrajectoryRecord {
                    episode,
                    step,
                    state: hash_hex(page.embedding.hash),
                    locator: action.locator.clone(),
                    class: action.class,
                    payload: action.payload.clone(),
                    center: action.center,
                    covered: covered.clone(),
                    r_ep,
                    alpha,
                    reward: total,
                    next_state: hash_hex(next_page.embedding.hash),
                    terminal: false,
                });
                transitions.push(Transition {
                    s: page.embedding.clone(),
                    grid,
                    action,
                    action_index: index,
                    covered,
                    reward: total,
                    s_next: next_page.embedding.clone(),
                    next_grid,
                    next_actions: next_actions.clone(),
                    terminal: false,
                });
                trace.push(RewardPoint { r_ep, alpha, total });
                visited_states.push(next_page.embedding.clone());

                seen.insert(next_page.embedding.hash);
                local.insert(next_page.embedding.hash);
                if let Some(id) = truth.and_then(|g| g.state_of(next_page.embedding.hash)) {
                    covered_states.insert(id);
                    if truth.and_then(|g| g.terminal_state) == Some(id) && report.terminal_episode.is_none() {
                        report.terminal_episode = Some(episode);
                    }
                }
                obs = next_obs;
                page = next_page;
                actions = next_actions;
            }

            for r in &records {
                serde_json::to_writer(&mut *log, r)?;
                log.write_all(b"\n")?;
            }
            log.flush()?;

            if let Some(reason) = aborted {
                report.partial = true;
                report.abort_reason = Some(reason);
                end = EpisodeEnd::Aborted;
            }

            let mut summary = EpisodeSummary {
                episode,
                steps: taken.len(),
                end,
                distinct_states: local.len(),
                cumulative_states: seen.len(),
                coverage: truth.map(|_| covered_states.len()),
                assisted: self.disc.as_ref().is_some_and(|d| d.is_assisted()),
                dqn_loss: None,
                ae_loss: None,
                probe_samples: 0,
            };

            if matches!(end, EpisodeEnd::Steps | EpisodeEnd::DeadEnd) {
                let clock = Instant::now();
                self.replay_store.push_episode(transitions);
                summary.ae_loss = self.reward.end_episode_update(&visited_states)?;
                summary.dqn_loss = self.dqn.train(&self.replay_store, self.config.gamma, &mut self.train_rng)?;
                t.learn += clock.elapsed().as_secs_f64();

                if let Some(disc) = self.disc.as_mut() {
                    let clock = Instant::now();
                    let outcome = probe_page(env, &obs, &taken, &mut self.round, disc.config.element_dim, episode);
                    failures.observe(&outcome.console, episode, taken.len());
                    summary.probe_samples = outcome.samples.len();
                    for s in outcome.samples {
                        disc.record(s);
                    }
                    t.probe += clock.elapsed().as_secs_f64();

                    let clock = Instant::now();
                    let was_assisted = disc.is_assisted();
                    match disc.maybe_update(episode, &mut self.disc_rng) {
                        crate::actions::UpdateOutcome::Activated | crate::actions::UpdateOutcome::Retrained => {
                            self.disc_version += 1;
                            self.disc_cache.clear();
                        }
                        _ => {}
                    }
                    if !was_assisted && disc.is_assisted() {
                        report.phase_switch_episode = Some(episode);
                        info!("discriminator active from episode {episode} with {} samples", disc.data.len());
                    }
                    t.discriminator += clock.elapsed().as_secs_f64();
                }
            }

            report.sequences.push(records.iter().map(RecordedStep::from).collect());
            report.reward_traces.push(trace);
            report.episodes.push(summary);
            if let Some(g) = truth {
                if covered_states.len() == g.state_count && report.full_coverage_episode.is_none() {
                    report.full_coverage_episode = Some(episode);
                }
            }
            if report.partial {
                break 'episodes;
            }
            if self.config.stop_at_full_coverage && report.full_coverage_episode.is_some() {
                break;
            }
        }

        report.distinct_states = seen.len();
        report.failures = failures.records();
        report.discriminator_samples = self.disc.as_ref().map_or(0, |d| d.data.len());
        report.timings = t;
        Ok(report)
    }
}

/// Builds the configured environment (and ground truth for fixtures).
pub fn build_environment(config: &RunConfig) -> Result<(Box<dyn Environment>, Option<GroundTruth>)> {
    match &config.target {
        Target::Fixture(spec) => {
            let (app, truth) = make_fixture(spec)?;
            Ok((Box::new(SimEnv::new(Arc::new(app))), Some(truth)))
        }
        Target::Url { start_url, webdriver } => {
            let mut wd = webdriver.clone();
            wd.start_url = start_url.clone();
            wd.settle_ms = config.settle_ms;
            Ok((Box::new(WebDriverEnv::connect(wd)?), None))
        }
    }
}

/// Runs the configured explorer end to end. With `output_dir` set, writes
/// `trajectory.jsonl` and `report.json` there.
pub fn run_exploration(config: &RunConfig) -> Result<RunReport> {
    let (mut env, truth) = build_environment(config)?;
    let mut explorer = Explorer::new(config.clone())?;
    let report = match &config.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut log = BufWriter::new(File::create(dir.join("trajectory.jsonl"))?);
            let report = explorer.run(env.as_mut(), truth.as_ref(), &mut log)?;
            log.flush()?;
            std::fs::write(dir.join("report.json"), serde_json::to_vec_pretty(&report)?)?;
            report
        }
        None => explorer.run(env.as_mut(), truth.as_ref(), &mut std::io::sink())?,
    };
    Ok(report)
}

/// [`run_exploration`] with the variant overridden.
pub fn run_ablation(config: &RunConfig, variant: AblationVariant) -> Result<RunReport> {
    run_exploration(&RunConfig { variant, ..config.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FixtureSpec;

    fn small(spec: FixtureSpec) -> RunConfig {
        let mut c = RunConfig::for_fixture(spec);
        c.episodes = 4;
        c.steps = 10;
        c.dqn.hidden = vec![32];
        c.dqn.batch_size = 8;
        c.dqn.updates_per_episode = 2;
        c.discriminator.threshold = 5;
        c
    }

    fn run_logged(config: &RunConfig) -> (RunReport, Vec<u8>) {
        let (mut env, truth) = build_environment(config).unwrap();
        let mut explorer = Explorer::new(config.clone()).unwrap();
        let mut log = Vec::new();
        let report = explorer.run(env.as_mut(), truth.as_ref(), &mut log).unwrap();
        (report, log)
    }

    #[test]
    fn zero_episodes_is_an_empty_report() {
        let mut c = small(FixtureSpec::deep_chain(3, 3, 0));
        c.episodes = 0;
        let r = run_exploration(&c).unwrap();
        assert!(r.sequences.is_empty());
        assert!(r.episodes.is_empty());
        assert!(!r.partial);
    }

    #[test]
    fn episode_accounting() {
        let c = small(FixtureSpec::deep_chain(3, 3, 1));
        let (r, log) = run_logged(&c);
        assert_eq!(r.completed_episodes(), 4);
        assert_eq!(r.episodes.len(), 4);
        let lines = log.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count();
        assert_eq!(lines, r.sequences.iter().map(Vec::len).sum::<usize>());
        for (seq, trace) in r.sequences.iter().zip(&r.reward_traces) {
            assert_eq!(seq.len(), trace.len());
            assert_eq!(seq.len(), 10);
        }
        let cov: Vec<usize> = r.episodes.iter().map(|e| e.coverage.unwrap()).collect();
        assert!(cov.windows(2).all(|w| w[0] <= w[1]));
        assert!(*cov.last().unwrap() <= r.state_count.unwrap());
    }

    #[test]
    fn same_seed_same_log() {
        let c = small(FixtureSpec::hidden_action(4, 3));
        assert_eq!(run_logged(&c).1, run_logged(&c).1);
        let other = RunConfig { seed: 9, ..c.clone() };
        assert_ne!(run_logged(&c).1, run_logged(&other).1);
    }

    #[test]
    fn star_reward_has_no_episodic_decay() {
        let mut c = small(FixtureSpec::deep_chain(3, 3, 2));
        c.variant = AblationVariant::Star;
        let (r, _) = run_logged(&c);
        for trace in &r.reward_traces {
            for p in trace {
                assert_eq!(p.total, global_multiplier(p.alpha, c.reward.scale_limit));
            }
        }
    }

    #[test]
    fn phase_is_monotone() {
        let mut c = small(FixtureSpec::hidden_action(4, 0));
        c.episodes = 8;
        let (r, _) = run_logged(&c);
        let phases: Vec<bool> = r.episodes.iter().map(|e| e.assisted).collect();
        assert!(phases.windows(2).all(|w| w[0] <= w[1]), "{phases:?}");
        assert!(r.phase_switch_episode.is_some());
    }

    #[test]
    fn minus_never_probes() {
        let mut c = small(FixtureSpec::hidden_action(4, 0));
        c.variant = AblationVariant::Minus;
        let (r, _) = run_logged(&c);
        assert_eq!(r.discriminator_samples, 0);
        assert!(r.episodes.iter().all(|e| e.probe_samples == 0 && !e.assisted));
    }

    #[test]
    fn deny_list_filters_actions() {
        let mut c = small(FixtureSpec::deep_chain(3, 3, 0));
        c.deny_list = vec!["button".into()];
        let (r, _) = run_logged(&c);
        assert!(r.sequences.iter().all(|s| s.is_empty()));
        assert!(r.episodes.iter().all(|e| e.end == EpisodeEnd::DeadEnd));
    }

    #[test]
    fn origin_strips_path() {
        assert_eq!(origin_of("http://localhost:8080/owners/1"), "http://localhost:8080");
        assert_eq!(origin_of("https://a.b"), "https://a.b");
    }
}
