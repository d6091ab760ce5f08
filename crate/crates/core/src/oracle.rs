//! Ground-truth utilities: optimal values for regret and covering estimates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::{BallWorldEnv, NonStationaryEnv, TabularNSEnv};
use crate::error::{Error, Result};
use crate::metric::Point;

/// Square grid over `[lo, hi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub resolution: usize,
    pub lo: f64,
    pub hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { resolution: 41, lo: -1.0, hi: 1.0 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 || !(self.hi > self.lo) {
            return Err(Error::InvalidConfig("grid needs resolution >= 2 and hi > lo".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.resolution - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalValueEstimate {
    pub episode: usize,
    pub value: f64,
    /// Grid resolution used; 0 for exact finite solutions.
    pub resolution: usize,
    /// The estimate planned on mean dynamics and ignores transition noise.
    pub noise_ignored: bool,
}

/// BallWorld discretized to the in-ball nodes of a grid. Mean next states are
/// snapped to the nearest in-ball node once, at construction.
#[derive(Debug, Clone)]
pub struct BallWorldGrid {
    grid: GridSpec,
    nodes: Vec<(f64, f64)>,
    /// `successor[node * A + a]`
    successor: Vec<usize>,
    num_actions: usize,
    horizon: usize,
}

impl BallWorldGrid {
    pub fn new(env: &BallWorldEnv, grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        let res = grid.resolution;
        let step = grid.spacing();
        let coord = |i: usize| grid.lo + i as f64 * step;
        let mut index = vec![usize::MAX; res * res];
        let mut nodes = Vec::new();
        for i in 0..res {
            for j in 0..res {
                let (x, y) = (coord(i), coord(j));
                if x * x + y * y <= 1.0 + 1e-12 {
                    index[i * res + j] = nodes.len();
                    nodes.push((x, y));
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::InvalidConfig("grid has no node inside the unit ball".into()));
        }
        let snap = |x: f64, y: f64| -> usize {
            let ci = ((x - grid.lo) / step).round() as isize;
            let cj = ((y - grid.lo) / step).round() as isize;
            let mut best = (f64::INFINITY, usize::MAX);
            for di in -2..=2 {
                for dj in -2..=2 {
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i >= res as isize || j >= res as isize {
                        continue;
                    }
                    let n = index[i as usize * res + j as usize];
                    if n == usize::MAX {
                        continue;
                    }
                    let (nx, ny) = nodes[n];
                    let d = (nx - x).powi(2) + (ny - y).powi(2);
                    if d < best.0 {
                        best = (d, n);
                    }
                }
            }
            if best.1 != usize::MAX {
                return best.1;
            }
            // far outside the local window: exhaustive search
            (0..nodes.len())
                .min_by(|&a, &b| {
                    let da = (nodes[a].0 - x).powi(2) + (nodes[a].1 - y).powi(2);
                    let db = (nodes[b].0 - x).powi(2) + (nodes[b].1 - y).powi(2);
                    da.total_cmp(&db)
                })
                .expect("non-empty")
        };
        let num_actions = env.num_actions();
        let mut successor = Vec::with_capacity(nodes.len() * num_actions);
        for &(x, y) in &nodes {
            for a in 0..num_actions {
                let (nx, ny) = env.mean_next_state(x, y, a);
                successor.push(snap(nx, ny));
            }
        }
        Ok(BallWorldGrid { grid, nodes, successor, num_actions, horizon: env.horizon() })
    }

    pub fn nodes(&self) -> &[(f64, f64)] {
        &self.nodes
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nearest_node(&self, x: f64, y: f64) -> usize {
        (0..self.nodes.len())
            .min_by(|&a, &b| {
                let da = (self.nodes[a].0 - x).powi(2) + (self.nodes[a].1 - y).powi(2);
                let db = (self.nodes[b].0 - x).powi(2) + (self.nodes[b].1 - y).powi(2);
                da.total_cmp(&db)
            })
            .expect("non-empty")
    }

    /// Optimal values `V_h` at every node for `h = 0..=H`, under the MDP of
    /// `episode`; `V_H = 0`.
    pub fn solve(&self, env: &BallWorldEnv, episode: usize) -> Vec<Vec<f64>> {
        let rewards: Vec<f64> =
            self.nodes.iter().map(|&(x, y)| env.mean_reward(episode, &Point::xy(x, y))).collect();
        let n = self.nodes.len();
        let mut values = vec![vec![0.0; n]; self.horizon + 1];
        for h in (0..self.horizon).rev() {
            let cap = (self.horizon - h) as f64;
            for s in 0..n {
                let best = (0..self.num_actions)
                    .map(|a| values[h + 1][self.successor[s * self.num_actions + a]])
                    .fold(f64::NEG_INFINITY, f64::max);
                values[h][s] = (rewards[s] + best).clamp(0.0, cap);
            }
        }
        values
    }
}

/// `V*_1(x_1)` for the MDP active in `episode`.
///
/// BallWorld is planned on its mean dynamics over `grid`; finite MDPs are
/// solved exactly and `grid` is ignored.
pub fn grid_value_iteration(
    env: &dyn NonStationaryEnv,
    episode: usize,
    grid: GridSpec,
    start: &Point,
) -> Result<OptimalValueEstimate> {
    if let Some(tab) = env.as_tabular() {
        let id = start
            .discrete_id()
            .ok_or_else(|| Error::InvalidInput("finite MDP start must be a discrete state".into()))?;
        let values = tabular_optimal_values(tab, episode);
        let value = *values
            .get(id)
            .ok_or_else(|| Error::InvalidInput(format!("state {id} out of range")))?;
        return Ok(OptimalValueEstimate { episode, value, resolution: 0, noise_ignored: false });
    }
    let ball = env
        .as_ball_world()
        .ok_or_else(|| Error::Unsupported("grid value iteration needs known mean dynamics".into()))?;
    let planner = BallWorldGrid::new(ball, grid)?;
    let (x, y) = start
        .xy_pair()
        .ok_or_else(|| Error::InvalidInput("BallWorld start must be a 2-d point".into()))?;
    let values = planner.solve(ball, episode);
    Ok(OptimalValueEstimate {
        episode,
        value: values[0][planner.nearest_node(x, y)],
        resolution: grid.resolution,
        noise_ignored: ball.params().noise_std > 0.0,
    })
}

/// Exact `V*_1` per state under the tables active in `episode`.
pub fn tabular_optimal_values(env: &TabularNSEnv, episode: usize) -> Vec<f64> {
    let block = env.block_at(episode);
    let (ns, na, horizon) = (env.num_states(), env.num_actions(), env.horizon());
    let mut next = vec![0.0; ns];
    for h in (0..horizon).rev() {
        let cur: Vec<f64> = (0..ns)
            .map(|x| {
                (0..na)
                    .map(|a| {
                        let expected: f64 =
                            block.transition[h][x][a].iter().zip(&next).map(|(p, v)| p * v).sum();
                        block.reward[h][x][a] + expected
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        next = cur;
    }
    next
}

/// Greedy pass keeping a point iff it is farther than `eps` from every kept
/// point. The kept set covers the input at scale `eps` and is `eps`-separated.
pub fn greedy_covering_estimate<T: Clone>(
    points: &[T],
    eps: f64,
    distance: impl Fn(&T, &T) -> f64,
) -> (usize, Vec<T>) {
    let mut kept: Vec<T> = Vec::new();
    for p in points {
        if kept.iter().all(|q| distance(p, q) > eps) {
            kept.push(p.clone());
        }
    }
    (kept.len(), kept)
}

/// `V*_1(x_1^k)` per episode, cached by the block of the non-stationary
/// schedule so each distinct MDP is solved once.
pub struct OptimalValueOracle {
    grid: GridSpec,
    ball: Option<BallWorldGrid>,
    cache: HashMap<usize, Vec<Vec<f64>>>,
}

impl OptimalValueOracle {
    pub fn new(env: &dyn NonStationaryEnv, grid: GridSpec) -> Result<Self> {
        let ball = match env.as_ball_world() {
            Some(b) => Some(BallWorldGrid::new(b, grid)?),
            None if env.as_tabular().is_some() => None,
            None => return Err(Error::Unsupported("no regret oracle for this environment".into())),
        };
        Ok(OptimalValueOracle { grid, ball, cache: HashMap::new() })
    }

    pub fn value(&mut self, env: &dyn NonStationaryEnv, episode: usize, start: &Point) -> Result<f64> {
        if let (Some(planner), Some(ball)) = (&self.ball, env.as_ball_world()) {
            let values = self
                .cache
                .entry(ball.block(episode))
                .or_insert_with(|| planner.solve(ball, episode));
            let (x, y) = start
                .xy_pair()
                .ok_or_else(|| Error::InvalidInput("BallWorld start must be a 2-d point".into()))?;
            return Ok(values[0][planner.nearest_node(x, y)]);
        }
        if let Some(tab) = env.as_tabular() {
            let id = start
                .discrete_id()
                .ok_or_else(|| Error::InvalidInput("finite MDP start must be a discrete state".into()))?;
            let values = self
                .cache
                .entry(tab.block_index(episode))
                .or_insert_with(|| vec![tabular_optimal_values(tab, episode)]);
            return values[0]
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("state {id} out of range")));
        }
        grid_value_iteration(env, episode, self.grid, start).map(|e| e.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BallWorldParams, TabularBlock};
    use proptest::prelude::*;

    fn chain_env() -> TabularNSEnv {
        // s0 --a0--> s1, s1 absorbing; reward 1 at s1 in the second step only
        let transition = vec![vec![vec![vec![0.0, 1.0]], vec![vec![0.0, 1.0]]]; 2];
        let mut reward = vec![vec![vec![0.0]; 2]; 2];
        reward[1][1][0] = 1.0;
        let block = TabularBlock { reward, transition };
        TabularNSEnv::new(2, 1, 0, vec![block], vec![0], 0).unwrap()
    }

    fn constant_env(r: f64, horizon: usize) -> TabularNSEnv {
        let block = TabularBlock {
            reward: vec![vec![vec![r]]; horizon],
            transition: vec![vec![vec![vec![1.0]]]; horizon],
        };
        TabularNSEnv::new(1, 1, 0, vec![block], vec![0], 0).unwrap()
    }

    #[test]
    fn tabular_examples() {
        assert_eq!(tabular_optimal_values(&constant_env(0.0, 3), 0), vec![0.0]);
        assert_eq!(tabular_optimal_values(&constant_env(0.5, 4), 0), vec![2.0]);
        let est = grid_value_iteration(&constant_env(0.3, 1), 0, GridSpec::default(), &Point::Discrete(0)).unwrap();
        assert_eq!(est.value, 0.3);
        assert_eq!(tabular_optimal_values(&chain_env(), 0)[0], 1.0);
    }

    #[test]
    fn three_state_line() {
        // states 0 - 1 - 2 (goal); action 0 moves right, action 1 stays
        let mut transition = vec![vec![vec![vec![0.0; 3]; 2]; 3]; 3];
        let mut reward = vec![vec![vec![0.0; 2]; 3]; 3];
        for h in 0..3 {
            for x in 0..3 {
                transition[h][x][0][(x + 1).min(2)] = 1.0;
                transition[h][x][1][x] = 1.0;
                reward[h][2] = vec![1.0, 1.0];
            }
        }
        let env = TabularNSEnv::new(3, 2, 0, vec![TabularBlock { reward, transition }], vec![0], 0).unwrap();
        assert_eq!(tabular_optimal_values(&env, 0)[0], 1.0);
    }

    #[test]
    fn ball_world_block_three_lower_bound() {
        let env = BallWorldEnv::new(BallWorldParams { noise_std: 0.0, ..Default::default() }, 0).unwrap();
        let k = 3 * env.params().period;
        let est = grid_value_iteration(&env, k, GridSpec::default(), &Point::xy(0.0, 0.0)).unwrap();
        assert!(est.value >= 7.0, "{}", est.value);
        assert!(est.value <= 15.0);
    }

    #[test]
    fn ball_world_resolution_stability() {
        let env = BallWorldEnv::new(BallWorldParams::default(), 0).unwrap();
        let coarse = GridSpec::default();
        let fine = GridSpec { resolution: 81, ..coarse };
        for block in 0..4 {
            let k = block * env.params().period;
            let a = grid_value_iteration(&env, k, coarse, &Point::xy(0.0, 0.0)).unwrap().value;
            let b = grid_value_iteration(&env, k, fine, &Point::xy(0.0, 0.0)).unwrap().value;
            assert!((a - b).abs() < 2.0 * coarse.spacing() * 15.0, "block {block}: {a} vs {b}");
        }
    }

    #[test]
    fn values_bounded_and_decreasing_in_step() {
        let env = BallWorldEnv::new(BallWorldParams::default(), 0).unwrap();
        let grid = BallWorldGrid::new(&env, GridSpec { resolution: 21, ..Default::default() }).unwrap();
        let v = grid.solve(&env, 2500);
        for h in 0..15 {
            for (now, later) in v[h].iter().zip(&v[h + 1]) {
                assert!(now >= later && *now <= 15.0 - h as f64);
            }
        }
    }

    #[test]
    fn unsupported_env_and_cache() {
        let env = BallWorldEnv::new(BallWorldParams::default(), 0).unwrap();
        let mut oracle = OptimalValueOracle::new(&env, GridSpec::default()).unwrap();
        let x = Point::xy(0.0, 0.0);
        let a = oracle.value(&env, 10, &x).unwrap();
        let direct = grid_value_iteration(&env, 10, GridSpec::default(), &x).unwrap().value;
        assert_eq!(a, direct);
        assert_eq!(oracle.value(&env, 999, &x).unwrap(), a);
        assert_eq!(oracle.cache.len(), 1);
    }

    #[test]
    fn covering_examples() {
        let d = |a: &f64, b: &f64| (a - b).abs();
        assert_eq!(greedy_covering_estimate(&[0.3], 0.1, d).0, 1);
        let line: Vec<f64> = (0..=5).map(|i| 0.2 * i as f64).collect();
        let (n, kept) = greedy_covering_estimate(&line, 0.3, d);
        assert_eq!(n, 3);
        assert!((kept[1] - 0.4).abs() < 1e-12 && (kept[2] - 0.8).abs() < 1e-12);
        let dup: Vec<f64> = line.iter().chain(&line).copied().collect();
        assert_eq!(greedy_covering_estimate(&dup, 0.3, d).0, 3);
    }

    proptest! {
        #[test]
        fn covering_is_cover_and_packing(
            pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..80),
            eps in 0.01f64..0.8,
        ) {
            let d = |a: &(f64, f64), b: &(f64, f64)| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt();
            let (n, kept) = greedy_covering_estimate(&pts, eps, d);
            prop_assert_eq!(n, kept.len());
            for p in &pts {
                prop_assert!(kept.iter().any(|q| d(p, q) <= eps));
            }
            for i in 0..kept.len() {
                for j in 0..i {
                    prop_assert!(d(&kept[i], &kept[j]) > eps);
                }
            }
        }
    }
}
