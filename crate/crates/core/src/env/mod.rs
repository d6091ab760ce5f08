//! Non-stationary episodic environments.
//!
//! Episodes are 0-based (`k = 0..K`) and so are steps (`h = 0..H`). The value
//! clip bound at step `h` is therefore `H - h`.

mod ballworld;
mod tabular;
mod variation;

pub use ballworld::{BallWorldEnv, BallWorldParams, BALL_CENTERS, BUMP_RADIUS, DEFAULT_SCHEDULE};
pub use tabular::{TabularBlock, TabularNSEnv};
pub use variation::{
    mdp_variation_reward, mdp_variation_reward_range, mdp_variation_transition_tv,
    mdp_variation_transition_tv_range,
};

use crate::metric::{ActionId, MetricSpec, Point};

/// An episodic MDP whose rewards and transitions may change between episodes.
///
/// `true_mean_reward` and `change_episodes` are oracle-only: agents never see
/// them, the harness uses them for regret and restart notifications.
pub trait NonStationaryEnv: Send {
    fn horizon(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn metric(&self) -> MetricSpec;

    fn reset(&mut self, episode: usize) -> Point;
    fn step(&mut self, episode: usize, step: usize, state: &Point, action: ActionId) -> (f64, Point);

    fn true_mean_reward(&self, episode: usize, step: usize, state: &Point, action: ActionId) -> f64;

    /// Sorted episodes `k` in `1..num_episodes` whose MDP differs from episode `k - 1`.
    fn change_episodes(&self, num_episodes: usize) -> Vec<usize>;

    /// Finite set of states over which suprema are approximated.
    fn state_grid(&self, resolution: usize) -> Vec<Point>;

    fn as_tabular(&self) -> Option<&TabularNSEnv> {
        None
    }

    fn as_ball_world(&self) -> Option<&BallWorldEnv> {
        None
    }
}
