use gridwalk::dom::{simplify, HashingEmbedder, StateEmbedder};
use gridwalk::env::{make_fixture, FixtureSpec};
use gridwalk::reward::{episodic_reward, mix, EpisodeBuffer, RewardConfig, RewardModelState};
use gridwalk::rng;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn features() -> impl Strategy<Value = Vec<Vec<f32>>> {
    // a few prototypes repeated, so similar-feature counts are non-trivial
    (prop::collection::vec(prop::collection::vec(-1.0f32..1.0, 6), 1..4), prop::collection::vec(0usize..4, 1..20))
        .prop_map(|(protos, picks)| picks.iter().map(|&i| protos[i % protos.len()].clone()).collect())
}

proptest! {
    #[test]
    fn total_reward_stays_in_range(r_ep in 1e-6f64..=1.0, alpha in 0.0f64..50.0, limit in 1.0f64..10.0) {
        let r = mix(r_ep, alpha, limit);
        prop_assert!(r > 0.0 && r <= limit);
        if alpha <= 1.0 {
            prop_assert_eq!(r, r_ep);
        }
    }

    #[test]
    fn episodic_reward_ignores_buffer_order(buf in features(), seed in any::<u64>(), tau in 0.5f64..=1.0) {
        let current = buf.last().unwrap().clone();
        let mut a = EpisodeBuffer::new(tau);
        buf.iter().for_each(|f| a.push(f.clone()));
        let mut shuffled = buf.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut b = EpisodeBuffer::new(tau);
        shuffled.into_iter().for_each(|f| b.push(f));
        let (ra, rb) = (episodic_reward(&a, &current).unwrap(), episodic_reward(&b, &current).unwrap());
        prop_assert_eq!(ra, rb);
        prop_assert!(ra > 0.0 && ra <= 1.0);
    }
}

#[test]
fn revisit_sequence_strictly_decreases_and_stays_positive() {
    let f = vec![0.5f32, 0.5, -0.5, 0.5];
    let mut buf = EpisodeBuffer::new(0.95);
    let mut last = f64::INFINITY;
    for _ in 0..1000 {
        buf.push(f.clone());
        let r = episodic_reward(&buf, &f).unwrap();
        assert!(r < last && r > 0.0);
        last = r;
    }
}

#[test]
fn visited_start_page_becomes_less_novel_than_unvisited_pages() {
    let (app, _) = make_fixture(&FixtureSpec::deep_chain(6, 5, 0)).unwrap();
    let embedder = HashingEmbedder::new(256);
    let states: Vec<_> = app.pages.iter().map(|p| embedder.embed(&simplify(&p.tree))).collect();
    let mut model = RewardModelState::new(256, &RewardConfig::default(), &mut rng::stream(0, "reward-init")).unwrap();
    let start = &states[app.start];
    for _ in 0..30 {
        model.end_episode_update(&vec![start.clone(); 10]).unwrap();
    }
    let seen = model.global_factor(start).unwrap();
    let mut unseen: Vec<f64> = states
        .iter()
        .filter(|s| s.hash != start.hash)
        .map(|s| model.global_factor(s).unwrap())
        .collect();
    unseen.sort_by(f64::total_cmp);
    assert!(seen < unseen[unseen.len() / 2], "seen {seen}, unseen median {}", unseen[unseen.len() / 2]);
}
