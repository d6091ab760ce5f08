use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use super::NonStationaryEnv;
use crate::error::{Error, Result};
use crate::metric::{ActionId, MetricSpec, Point};

pub const BALL_CENTERS: [(f64, f64); 4] = [(0.8, 0.0), (0.0, 0.8), (-0.8, 0.0), (0.0, -0.8)];
pub const BUMP_RADIUS: f64 = 0.5;

/// Bump coefficients per change block, indexed by `floor(k / N) mod 4`.
pub const DEFAULT_SCHEDULE: [[f64; 4]; 4] = [
    [0.25, 0.0, 0.0, 0.0],
    [0.25, 0.5, 0.0, 0.0],
    [0.25, 0.5, 0.75, 0.0],
    [0.25, 0.5, 0.75, 1.0],
];

/// Unit displacement per action: right, left, up, down.
const DIRECTIONS: [(f64, f64); 4] = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallWorldParams {
    pub horizon: usize,
    /// Episodes between coefficient changes.
    pub period: usize,
    pub noise_std: f64,
    pub step_size: f64,
    /// Half-width of optional uniform reward noise (clamped to [0, 1]).
    pub reward_noise: f64,
    pub schedule: Vec<[f64; 4]>,
}

impl Default for BallWorldParams {
    fn default() -> Self {
        BallWorldParams {
            horizon: 15,
            period: 1000,
            noise_std: 0.01,
            step_size: 0.1,
            reward_noise: 0.0,
            schedule: DEFAULT_SCHEDULE.to_vec(),
        }
    }
}

/// The unit ball of `R^2` with four move actions and four reward bumps whose
/// heights change every `period` episodes.
#[derive(Debug, Clone)]
pub struct BallWorldEnv {
    params: BallWorldParams,
    rng: ChaCha8Rng,
    dynamics_noise: Option<Normal<f64>>,
}

impl BallWorldEnv {
    pub fn new(params: BallWorldParams, seed: u64) -> Result<Self> {
        if params.horizon == 0 || params.period == 0 {
            return Err(Error::InvalidConfig("ball world needs horizon >= 1 and period >= 1".into()));
        }
        if params.schedule.is_empty() {
            return Err(Error::InvalidConfig("ball world schedule is empty".into()));
        }
        if !(params.noise_std >= 0.0) || !(params.reward_noise >= 0.0) {
            return Err(Error::InvalidConfig("noise levels must be >= 0".into()));
        }
        let dynamics_noise = if params.noise_std > 0.0 {
            Some(Normal::new(0.0, params.noise_std).map_err(|e| Error::InvalidConfig(e.to_string()))?)
        } else {
            None
        };
        Ok(BallWorldEnv { params, rng: ChaCha8Rng::seed_from_u64(seed), dynamics_noise })
    }

    pub fn params(&self) -> &BallWorldParams {
        &self.params
    }

    pub fn block(&self, episode: usize) -> usize {
        (episode / self.params.period) % self.params.schedule.len()
    }

    pub fn coefficients(&self, episode: usize) -> [f64; 4] {
        self.params.schedule[self.block(episode)]
    }

    /// `sum_i b_i max(0, 1 - |x - x_i| / 0.5)`, clamped to [0, 1].
    pub fn mean_reward(&self, episode: usize, state: &Point) -> f64 {
        let c = state.coords().expect("ball world states are coordinates");
        bump_reward(&self.coefficients(episode), c[0], c[1])
    }

    /// Deterministic part of the dynamics.
    pub fn mean_next_state(&self, x: f64, y: f64, action: ActionId) -> (f64, f64) {
        let (dx, dy) = DIRECTIONS[action];
        project_to_unit_ball(x + self.params.step_size * dx, y + self.params.step_size * dy)
    }
}

pub(crate) fn bump_reward(b: &[f64; 4], x: f64, y: f64) -> f64 {
    let r: f64 = BALL_CENTERS
        .iter()
        .zip(b)
        .map(|(&(cx, cy), &bi)| {
            let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
            bi * (1.0 - d / BUMP_RADIUS).max(0.0)
        })
        .sum();
    r.clamp(0.0, 1.0)
}

pub(crate) fn project_to_unit_ball(x: f64, y: f64) -> (f64, f64) {
    let n = (x * x + y * y).sqrt();
    if n > 1.0 {
        (x / n, y / n)
    } else {
        (x, y)
    }
}

impl NonStationaryEnv for BallWorldEnv {
    fn horizon(&self) -> usize {
        self.params.horizon
    }

    fn num_actions(&self) -> usize {
        4
    }

    fn metric(&self) -> MetricSpec {
        MetricSpec::euclidean()
    }

    fn reset(&mut self, _episode: usize) -> Point {
        Point::xy(0.0, 0.0)
    }

    fn step(&mut self, episode: usize, _step: usize, state: &Point, action: ActionId) -> (f64, Point) {
        let c = state.coords().expect("ball world states are coordinates");
        let mut reward = bump_reward(&self.coefficients(episode), c[0], c[1]);
        let (dx, dy) = DIRECTIONS[action];
        let mut nx = c[0] + self.params.step_size * dx;
        let mut ny = c[1] + self.params.step_size * dy;
        if let Some(noise) = &self.dynamics_noise {
            nx += noise.sample(&mut self.rng);
            ny += noise.sample(&mut self.rng);
        }
        let (nx, ny) = project_to_unit_ball(nx, ny);
        if self.params.reward_noise > 0.0 {
            let w = self.params.reward_noise;
            let u = Uniform::new_inclusive(-w, w).expect("valid bounds");
            reward = (reward + u.sample(&mut self.rng)).clamp(0.0, 1.0);
        }
        (reward, Point::xy(nx, ny))
    }

    fn true_mean_reward(&self, episode: usize, _step: usize, state: &Point, _action: ActionId) -> f64 {
        self.mean_reward(episode, state)
    }

    fn change_episodes(&self, num_episodes: usize) -> Vec<usize> {
        (1..num_episodes)
            .filter(|&k| self.coefficients(k) != self.coefficients(k - 1))
            .collect()
    }

    /// `resolution x resolution` grid over `[-1, 1]^2` restricted to the ball.
    fn state_grid(&self, resolution: usize) -> Vec<Point> {
        let res = resolution.max(2);
        let step = 2.0 / (res - 1) as f64;
        let mut pts = Vec::new();
        for i in 0..res {
            for j in 0..res {
                let x = -1.0 + i as f64 * step;
                let y = -1.0 + j as f64 * step;
                if x * x + y * y <= 1.0 + 1e-12 {
                    pts.push(Point::xy(x, y));
                }
            }
        }
        pts
    }

    fn as_ball_world(&self) -> Option<&BallWorldEnv> {
        Some(self)
    }
}
