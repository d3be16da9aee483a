mod support;

use gridwalk::geom::Point;
use gridwalk::grid::{
    action_values, covered_cells, covered_with_betas, make_targets, predict_cells, BetaMode, BootstrapMode, GridSpec,
    Transition,
};
use gridwalk::nn::MlpParams;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{click_action, random_embedding};

fn grid_strategy() -> impl Strategy<Value = GridSpec> {
    (1usize..25, 50.0f64..2000.0, 50.0f64..2000.0).prop_map(|(n, w, h)| GridSpec::new(n, w, h).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn values_follow_centres_not_list_order(
        seed in any::<u64>(),
        grid in grid_strategy(),
        fracs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..12),
        rotate in 0usize..12,
    ) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let net = MlpParams::new(&[8, 16, grid.cells()], &mut r).unwrap();
        let s = random_embedding(8, &mut r);
        // the same embedding under a different state id must give the same map
        let twin = gridwalk::dom::StateEmbedding { vector: s.vector.clone(), hash: s.hash ^ 1 };
        let actions: Vec<_> = fracs
            .iter()
            .enumerate()
            .map(|(i, &(fx, fy))| click_action(&format!("/html[1]/body[1]/a[{}]", i + 1), fx * grid.page_w, fy * grid.page_h))
            .collect();
        let mut permuted = actions.clone();
        permuted.rotate_left(rotate % actions.len());
        let v = action_values(&predict_cells(&net, &s, &grid).unwrap(), &actions, &grid).unwrap();
        let w = action_values(&predict_cells(&net, &twin, &grid).unwrap(), &permuted, &grid).unwrap();
        for (i, a) in permuted.iter().enumerate() {
            let j = actions.iter().position(|b| b.locator == a.locator).unwrap();
            prop_assert_eq!(w[i], v[j]);
        }
    }

    #[test]
    fn reflection_maps_covered_sets(n in 1usize..25, cw in 10u32..120, ch in 10u32..120, fx in 0.0f64..=1.0, fy in 0.0f64..=1.0) {
        // integral cell sizes keep reflected centres exact
        let (w, h) = ((cw as usize * n) as f64, (ch as usize * n) as f64);
        let grid = GridSpec::new(n, w, h).unwrap();
        let (x, y) = ((fx * w).round(), (fy * h).round());
        let reflect = |i: usize, horiz: bool| {
            let (row, col) = (i / n, i % n);
            if horiz { row * n + (n - 1 - col) } else { (n - 1 - row) * n + col }
        };
        let base = covered_cells(Point::new(x, y), &grid).unwrap();
        for (horiz, p) in [(true, Point::new(w - x, y)), (false, Point::new(x, h - y))] {
            let mut want: Vec<usize> = base.iter().map(|&(i, _)| reflect(i, horiz)).collect();
            want.sort_unstable();
            let got: Vec<usize> = covered_cells(p, &grid).unwrap().into_iter().map(|(i, _)| i).collect();
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn beta_mass_is_translation_invariant_inside(n in 9usize..25, cell in 10u32..80, fx in 0.0f64..1.0, fy in 0.0f64..1.0, dx in -2i32..=2, dy in -2i32..=2) {
        let size = cell as f64;
        let grid = GridSpec::new(n, size * n as f64, size * n as f64).unwrap();
        // keep both circles at least two cells from every edge
        let lo = 4.0 * size;
        let span = grid.page_w - 2.0 * lo;
        let (x, y) = (lo + fx * span, lo + fy * span);
        let shifted = Point::new(x + dx as f64 * size, y + dy as f64 * size);
        let mass = |p: Point| covered_with_betas(p, &grid, BetaMode::Prose).unwrap().iter().map(|c| c.1).sum::<f64>();
        let (a, b) = (mass(Point::new(x, y)), mass(shifted));
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn zero_discount_targets_are_scaled_rewards(seed in any::<u64>(), reward in -3.0f64..3.0, fx in 0.0f64..=1.0, fy in 0.0f64..=1.0) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let grid = GridSpec::new(4, 800.0, 600.0).unwrap();
        let net = MlpParams::new(&[8, 16, 16], &mut r).unwrap();
        let center = Point::new(fx * 800.0, fy * 600.0);
        let covered = covered_with_betas(center, &grid, BetaMode::Prose).unwrap();
        let t = Transition {
            s: random_embedding(8, &mut r),
            grid,
            action: click_action("/html[1]/body[1]/a[1]", center.x, center.y),
            action_index: 0,
            covered: covered.clone(),
            reward,
            s_next: random_embedding(8, &mut r),
            next_grid: grid,
            next_actions: vec![click_action("/html[1]/body[1]/a[2]", 400.0, 300.0)],
            terminal: false,
        };
        for mode in [BootstrapMode::Sum, BootstrapMode::Mean] {
            let (target, mask) = make_targets(&t, &net, 0.0, mode).unwrap();
            for i in 0..16 {
                match covered.iter().find(|c| c.0 == i) {
                    Some(&(_, beta)) => {
                        prop_assert_eq!(mask[i], 1.0);
                        prop_assert_eq!(target[i], (beta * reward) as f32);
                    }
                    None => prop_assert_eq!(mask[i], 0.0),
                }
            }
        }
    }
}
