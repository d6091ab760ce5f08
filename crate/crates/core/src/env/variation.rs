//! Total variation of a changing MDP over a run.

use super::NonStationaryEnv;
use crate::error::{Error, Result};

/// `sum_k sum_h sup_{x,a} |r_h^k(x,a) - r_h^{k+1}(x,a)|` over episodes
/// `0..num_episodes`, the supremum taken over `env.state_grid(resolution)`.
pub fn mdp_variation_reward(env: &dyn NonStationaryEnv, num_episodes: usize, resolution: usize) -> f64 {
    mdp_variation_reward_range(env, 0, num_episodes, resolution)
}

/// Same sum restricted to consecutive pairs `(k, k + 1)` inside `[start, end)`.
/// Ranges sharing an endpoint add up: `[0, m+1) + [m, K) = [0, K)`.
pub fn mdp_variation_reward_range(
    env: &dyn NonStationaryEnv,
    start: usize,
    end: usize,
    resolution: usize,
) -> f64 {
    let changes: Vec<usize> = env
        .change_episodes(end)
        .into_iter()
        .filter(|&k| k > start)
        .collect();
    if changes.is_empty() {
        return 0.0;
    }
    let grid = env.state_grid(resolution);
    let actions = env.num_actions();
    let mut total = 0.0;
    for k in changes {
        for h in 0..env.horizon() {
            let mut sup = 0.0f64;
            for x in &grid {
                for a in 0..actions {
                    let diff = (env.true_mean_reward(k - 1, h, x, a) - env.true_mean_reward(k, h, x, a)).abs();
                    sup = sup.max(diff);
                }
            }
            total += sup;
        }
    }
    total
}

/// `sum_k sum_h max_{x,a} || P_h^k(.|x,a) - P_h^{k+1}(.|x,a) ||_1` for finite
/// environments (the L1 surrogate of the Wasserstein variation).
pub fn mdp_variation_transition_tv(env: &dyn NonStationaryEnv, num_episodes: usize) -> Result<f64> {
    mdp_variation_transition_tv_range(env, 0, num_episodes)
}

pub fn mdp_variation_transition_tv_range(env: &dyn NonStationaryEnv, start: usize, end: usize) -> Result<f64> {
    let tab = env
        .as_tabular()
        .ok_or_else(|| Error::Unsupported("transition variation needs a finite environment".into()))?;
    let mut total = 0.0;
    for k in env.change_episodes(end).into_iter().filter(|&k| k > start) {
        let before = tab.block_at(k - 1);
        let after = tab.block_at(k);
        for h in 0..env.horizon() {
            let mut worst = 0.0f64;
            for (rows_b, rows_a) in before.transition[h].iter().zip(&after.transition[h]) {
                for (pb, pa) in rows_b.iter().zip(rows_a) {
                    let l1: f64 = pb.iter().zip(pa).map(|(u, v)| (u - v).abs()).sum();
                    worst = worst.max(l1);
                }
            }
            total += worst;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{BallWorldEnv, BallWorldParams, TabularBlock, TabularNSEnv};
    use proptest::prelude::*;

    fn ball(period: usize, horizon: usize) -> BallWorldEnv {
        BallWorldEnv::new(BallWorldParams { period, horizon, ..Default::default() }, 0).unwrap()
    }

    fn block(h: usize, s: usize, a: usize, r: f64, target: usize) -> TabularBlock {
        let mut row = vec![0.0; s];
        row[target] = 1.0;
        TabularBlock { reward: vec![vec![vec![r; a]; s]; h], transition: vec![vec![vec![row; a]; s]; h] }
    }

    #[test]
    fn ball_world_reward_variation() {
        assert_eq!(mdp_variation_reward(&ball(100, 15), 50, 201), 0.0);
        let v = mdp_variation_reward(&ball(10, 15), 20, 201);
        assert!((v - 7.5).abs() < 1e-9, "{v}");
    }

    #[test]
    fn tabular_variations() {
        let same = TabularNSEnv::new(2, 1, 0, vec![block(2, 2, 1, 0.3, 0), block(2, 2, 1, 0.3, 0)], vec![0, 3], 0).unwrap();
        assert_eq!(mdp_variation_reward(&same, 10, 0), 0.0);
        assert_eq!(mdp_variation_transition_tv(&same, 10).unwrap(), 0.0);

        let flip = TabularNSEnv::new(2, 1, 0, vec![block(1, 2, 1, 0.0, 0), block(1, 2, 1, 0.0, 1)], vec![0, 3], 0).unwrap();
        assert_eq!(mdp_variation_transition_tv(&flip, 10).unwrap(), 2.0);

        let mut moved = block(2, 2, 1, 0.0, 0);
        moved.transition[0][1][0] = vec![0.7, 0.3];
        moved.transition[1][1][0] = vec![0.7, 0.3];
        let env = TabularNSEnv::new(2, 1, 0, vec![block(2, 2, 1, 0.0, 0), moved], vec![0, 4], 0).unwrap();
        let tv = mdp_variation_transition_tv(&env, 10).unwrap();
        assert!((tv - 1.2).abs() < 1e-12, "{tv}");
    }

    #[test]
    fn transition_variation_needs_finite_env() {
        assert!(matches!(
            mdp_variation_transition_tv(&ball(10, 5), 30),
            Err(Error::Unsupported(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn reward_variation_is_additive(period in 1usize..6, k in 2usize..30, split in 0usize..30) {
            let env = ball(period, 2);
            let m = split % k;
            let whole = mdp_variation_reward_range(&env, 0, k, 21);
            let parts = mdp_variation_reward_range(&env, 0, m + 1, 21) + mdp_variation_reward_range(&env, m, k, 21);
            prop_assert!((whole - parts).abs() < 1e-9);
        }
    }
}
