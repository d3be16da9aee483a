//! Grid-based action values. The page is cut into `N x N` cells, the value
//! network predicts one value per cell, and an action is worth the sum of the
//! cells whose centres lie within radius `R` of the action's centre.

mod list;
mod replay;
mod train;

pub use list::{list_values, make_list_targets};
pub use replay::{hash_hex, ReplayStore, TrajectoryRecord, Transition};
pub use train::{make_targets, BootstrapMode, Dqn, DqnConfig, ValueHead};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::actions::Action;
use crate::dom::StateEmbedding;
use crate::error::{contract, Result};
use crate::geom::Point;
use crate::nn::MlpParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub page_w: f64,
    pub page_h: f64,
}

impl GridSpec {
    pub fn new(n: usize, page_w: f64, page_h: f64) -> Result<Self> {
        if n == 0 {
            return Err(contract("grid needs at least one cell per side"));
        }
        if !(page_w > 0.0 && page_h > 0.0 && page_w.is_finite() && page_h.is_finite()) {
            return Err(contract(format!("page size must be positive, got {page_w}x{page_h}")));
        }
        Ok(Self { n, page_w, page_h })
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn cell_w(&self) -> f64 {
        self.page_w / self.n as f64
    }

    pub fn cell_h(&self) -> f64 {
        self.page_h / self.n as f64
    }

    /// 1.5 times the longer cell side.
    pub fn radius(&self) -> f64 {
        1.5 * self.cell_w().max(self.cell_h())
    }

    /// Centre of cell `index` (row-major: `row * n + col`).
    pub fn cell_center(&self, index: usize) -> Point {
        let (row, col) = (index / self.n, index % self.n);
        Point::new((col as f64 + 0.5) * self.cell_w(), (row as f64 + 0.5) * self.cell_h())
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.page_w && p.y <= self.page_h
    }
}

/// Cells whose centre is within `R` (inclusive) of `center`, in ascending
/// index order, with their exact distances.
pub fn covered_cells(center: Point, grid: &GridSpec) -> Result<Vec<(usize, f64)>> {
    if !grid.contains(center) || !center.x.is_finite() || !center.y.is_finite() {
        return Err(contract(format!("action centre ({}, {}) outside the page", center.x, center.y)));
    }
    let r = grid.radius();
    let (cw, ch) = (grid.cell_w(), grid.cell_h());
    let span = |c: f64, size: f64| {
        let lo = (((c - r) / size - 0.5).floor().max(0.0)) as usize;
        let hi = (((c + r) / size - 0.5).ceil().max(0.0) as usize).min(grid.n - 1);
        (lo, hi)
    };
    let (c0, c1) = span(center.x, cw);
    let (r0, r1) = span(center.y, ch);
    let mut out = Vec::new();
    for row in r0..=r1 {
        for col in c0..=c1 {
            let idx = row * grid.n + col;
            let d = center.distance(grid.cell_center(idx));
            if d <= r {
                out.push((idx, d));
            }
        }
    }
    Ok(out)
}

/// How the per-cell reward share falls off with distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMode {
    /// `1 - d/R`: the nearest cell gets the largest share.
    #[default]
    Prose,
    /// `d/R`.
    Literal,
}

pub fn beta_weights(distances: &[f64], radius: f64, mode: BetaMode) -> Result<Vec<f64>> {
    distances
        .iter()
        .map(|&d| {
            if !(d >= 0.0 && d <= radius) {
                return Err(contract(format!("distance {d} outside [0, {radius}]")));
            }
            let ratio = d / radius;
            Ok(match mode {
                BetaMode::Prose => 1.0 - ratio,
                BetaMode::Literal => ratio,
            }
            .clamp(0.0, 1.0))
        })
        .collect()
}

/// Covered cells paired with their β weights.
pub fn covered_with_betas(center: Point, grid: &GridSpec, mode: BetaMode) -> Result<Vec<(usize, f64)>> {
    let cells = covered_cells(center, grid)?;
    let d: Vec<f64> = cells.iter().map(|c| c.1).collect();
    let betas = beta_weights(&d, grid.radius(), mode)?;
    Ok(cells.into_iter().zip(betas).map(|((i, _), b)| (i, b)).collect())
}

/// Per-cell values for one state, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValueMap {
    pub n: usize,
    pub values: Vec<f32>,
    pub produced_for: u64,
}

impl GridValueMap {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.n + col]
    }
}

pub fn predict_cells(dqn: &MlpParams, s: &StateEmbedding, grid: &GridSpec) -> Result<GridValueMap> {
    if dqn.output_dim() != grid.cells() {
        return Err(contract(format!("value net emits {} values for a {}-cell grid", dqn.output_dim(), grid.cells())));
    }
    let values = dqn.forward(&s.vector)?;
    if values.iter().any(|v| !v.is_finite()) {
        return Err(contract("value net produced non-finite cell values"));
    }
    Ok(GridValueMap { n: grid.n, values, produced_for: s.hash })
}

/// Sum of covered cell values at a point.
pub fn value_at(values: &[f32], center: Point, grid: &GridSpec) -> Result<f64> {
    Ok(covered_cells(center, grid)?.iter().map(|&(i, _)| values[i] as f64).sum())
}

/// Unweighted sum of covered cells for each action, in input order.
pub fn action_values(map: &GridValueMap, actions: &[Action], grid: &GridSpec) -> Result<Vec<f64>> {
    if map.values.len() != grid.cells() {
        return Err(contract("value map does not match the grid"));
    }
    actions.iter().map(|a| value_at(&map.values, a.center, grid)).collect()
}

/// β-weighted variant of [`action_values`].
pub fn weighted_action_values(map: &GridValueMap, actions: &[Action], grid: &GridSpec, mode: BetaMode) -> Result<Vec<f64>> {
    actions
        .iter()
        .map(|a| Ok(covered_with_betas(a.center, grid, mode)?.iter().map(|&(i, b)| b * map.values[i] as f64).sum()))
        .collect()
}

/// ε-greedy choice. `None` for an empty action list (dead end). Greedy ties
/// go to the lowest index. One uniform draw is consumed per call, plus one
/// index draw when exploring.
pub fn select_action<R: Rng + ?Sized>(values: &[f64], epsilon: f64, rng: &mut R) -> Result<Option<usize>> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(contract(format!("epsilon {epsilon} outside [0, 1]")));
    }
    if values.is_empty() {
        return Ok(None);
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(Some(rng.gen_range(0..values.len())));
    }
    Ok(Some(argmax(values)))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn square() -> GridSpec {
        GridSpec::new(20, 1000.0, 1000.0).unwrap()
    }

    #[test]
    fn cell_center_covers_nine() {
        let cells = covered_cells(Point::new(525.0, 525.0), &square()).unwrap();
        assert_eq!(cells.len(), 9);
        let mut d: Vec<f64> = cells.iter().map(|c| c.1).collect();
        d.sort_by(f64::total_cmp);
        assert_eq!(d[0], 0.0);
        assert!(d[1..5].iter().all(|&x| (x - 50.0).abs() < 1e-9));
        assert!(d[5..].iter().all(|&x| (x - 50.0 * 2f64.sqrt()).abs() < 1e-9));
    }

    #[test]
    fn corner_covers_only_its_cell() {
        let cells = covered_cells(Point::new(0.0, 0.0), &square()).unwrap();
        assert_eq!(cells.len(), 1);
        assert!((cells[0].1 - 35.355_339_059_327_38).abs() < 1e-9);
    }

    #[test]
    fn outside_page_is_a_contract_error() {
        assert!(covered_cells(Point::new(-1.0, 5.0), &square()).is_err());
        assert!(covered_cells(Point::new(5.0, 1000.5), &square()).is_err());
    }

    #[test]
    fn betas_both_modes() {
        let b = beta_weights(&[0.0, 50.0, 75.0], 75.0, BetaMode::Prose).unwrap();
        assert_eq!(b[0], 1.0);
        assert!((b[1] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(b[2], 0.0);
        let l = beta_weights(&[50.0, 75.0], 75.0, BetaMode::Literal).unwrap();
        assert!((l[0] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(l[1], 1.0);
        assert!(beta_weights(&[76.0], 75.0, BetaMode::Prose).is_err());
    }

    #[test]
    fn uniform_map_interior_value() {
        let g = square();
        let map = GridValueMap { n: 20, values: vec![0.5; 400], produced_for: 0 };
        let a = Action::new(
            "/a[1]",
            crate::actions::ActionClass::Click,
            crate::geom::BBox::new(500.0, 500.0, 50.0, 50.0),
            None,
            crate::actions::Origin::Heuristic,
        );
        assert_eq!(action_values(&map, &[a], &g).unwrap(), [4.5]);
    }

    #[test]
    fn greedy_selection_and_ties() {
        let mut rng = stream(0, "sel");
        assert_eq!(select_action(&[1.0, 3.0, 2.0], 0.0, &mut rng).unwrap(), Some(1));
        assert_eq!(select_action(&[5.0, 5.0], 0.0, &mut rng).unwrap(), Some(0));
        assert_eq!(select_action(&[], 0.4, &mut rng).unwrap(), None);
        assert!(select_action(&[1.0], 1.5, &mut rng).is_err());
    }

    #[test]
    fn uniform_exploration_frequencies() {
        let mut rng = stream(7, "sel");
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[select_action(&[0.0, 1.0, 2.0, 3.0], 1.0, &mut rng).unwrap().unwrap()] += 1;
        }
        for c in counts {
            assert!((c as f64 / 10_000.0 - 0.25).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn zero_net_gives_zero_map() {
        let g = GridSpec::new(3, 300.0, 300.0).unwrap();
        let net = MlpParams::zeros(&[4, 5, 9]).unwrap();
        let s = StateEmbedding { vector: vec![0.5; 4], hash: 9 };
        let map = predict_cells(&net, &s, &g).unwrap();
        assert_eq!(map.values, vec![0.0; 9]);
        assert_eq!(map.produced_for, 9);
        assert!(predict_cells(&net, &s, &GridSpec::new(2, 1.0, 1.0).unwrap()).is_err());
    }
}
