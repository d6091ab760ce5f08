use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NonStationaryEnv;
use crate::error::{Error, Result};
use crate::metric::{ActionId, MetricSpec, Point};

/// Reward and transition tables active during one block of episodes.
///
/// `reward[h][x][a]`, `transition[h][x][a][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularBlock {
    pub reward: Vec<Vec<Vec<f64>>>,
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Finite non-stationary MDP. Block `i` is active on episodes
/// `[starts[i], starts[i + 1])`; the first start must be 0.
#[derive(Debug, Clone)]
pub struct TabularNSEnv {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    blocks: Vec<TabularBlock>,
    starts: Vec<usize>,
    rng: ChaCha8Rng,
}

impl TabularNSEnv {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        initial_state: usize,
        blocks: Vec<TabularBlock>,
        starts: Vec<usize>,
        seed: u64,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if num_states == 0 || num_actions == 0 || initial_state >= num_states {
            return bad("tabular env needs states, actions and a valid initial state".into());
        }
        if blocks.is_empty() || blocks.len() != starts.len() || starts[0] != 0 {
            return bad("block starts must begin at 0 and match the number of blocks".into());
        }
        if starts.windows(2).any(|w| w[1] <= w[0]) {
            return bad("block starts must be strictly increasing".into());
        }
        let horizon = blocks[0].reward.len();
        if horizon == 0 {
            return bad("tabular env needs horizon >= 1".into());
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.reward.len() != horizon || b.transition.len() != horizon {
                return bad(format!("block {i}: horizon mismatch"));
            }
            for h in 0..horizon {
                if b.reward[h].len() != num_states || b.transition[h].len() != num_states {
                    return bad(format!("block {i}, step {h}: state count mismatch"));
                }
                for x in 0..num_states {
                    if b.reward[h][x].len() != num_actions || b.transition[h][x].len() != num_actions {
                        return bad(format!("block {i}, step {h}, state {x}: action count mismatch"));
                    }
                    for a in 0..num_actions {
                        let r = b.reward[h][x][a];
                        if !(0.0..=1.0).contains(&r) {
                            return bad(format!("reward {r} outside [0, 1] at block {i} ({h},{x},{a})"));
                        }
                        let row = &b.transition[h][x][a];
                        if row.len() != num_states || row.iter().any(|&p| p < 0.0) {
                            return bad(format!("bad transition row at block {i} ({h},{x},{a})"));
                        }
                        let total: f64 = row.iter().sum();
                        if (total - 1.0).abs() > 1e-12 {
                            return bad(format!("transition row sums to {total} at block {i} ({h},{x},{a})"));
                        }
                    }
                }
            }
        }
        Ok(TabularNSEnv {
            num_states,
            num_actions,
            horizon,
            initial_state,
            blocks,
            starts,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// Blocks that repeat cyclically every `period` episodes.
    pub fn periodic(
        num_states: usize,
        num_actions: usize,
        initial_state: usize,
        blocks: Vec<TabularBlock>,
        period: usize,
        num_episodes: usize,
        seed: u64,
    ) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidConfig("period must be >= 1".into()));
        }
        let n = blocks.len();
        let count = num_episodes.div_ceil(period).max(1);
        let expanded: Vec<TabularBlock> = (0..count).map(|i| blocks[i % n].clone()).collect();
        let starts = (0..count).map(|i| i * period).collect();
        Self::new(num_states, num_actions, initial_state, expanded, starts, seed)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn block_index(&self, episode: usize) -> usize {
        self.starts.partition_point(|&s| s <= episode) - 1
    }

    pub fn block_at(&self, episode: usize) -> &TabularBlock {
        &self.blocks[self.block_index(episode)]
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }
}

impl NonStationaryEnv for TabularNSEnv {
    fn horizon(&self) -> usize {
        self.horizon
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn metric(&self) -> MetricSpec {
        MetricSpec::discrete()
    }

    fn reset(&mut self, _episode: usize) -> Point {
        Point::Discrete(self.initial_state)
    }

    fn step(&mut self, episode: usize, step: usize, state: &Point, action: ActionId) -> (f64, Point) {
        let x = state.discrete_id().expect("tabular states are discrete");
        let block = &self.blocks[self.block_index(episode)];
        let reward = block.reward[step][x][action];
        let row = &block.transition[step][x][action];
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut next = row.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                next = y;
                break;
            }
        }
        (reward, Point::Discrete(next))
    }

    fn true_mean_reward(&self, episode: usize, step: usize, state: &Point, action: ActionId) -> f64 {
        let x = state.discrete_id().expect("tabular states are discrete");
        self.block_at(episode).reward[step][x][action]
    }

    fn change_episodes(&self, num_episodes: usize) -> Vec<usize> {
        self.starts
            .iter()
            .copied()
            .filter(|&s| s > 0 && s < num_episodes)
            .filter(|&s| {
                let i = self.block_index(s);
                self.blocks[i] != self.blocks[i - 1]
            })
            .collect()
    }

    fn state_grid(&self, _resolution: usize) -> Vec<Point> {
        (0..self.num_states).map(Point::Discrete).collect()
    }

    fn as_tabular(&self) -> Option<&TabularNSEnv> {
        Some(self)
    }
}
