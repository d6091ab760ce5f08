//! Exploration bonuses as a function of the generalized count `C`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum BonusConfig {
    /// `c / sqrt(C) + beta H / C`.
    Experiment { c: f64 },
    /// `c1 H / sqrt(C) + c2 beta H / C + c3 L1 sigma`.
    Simple { c1: f64, c2: f64, c3: f64 },
    /// Full confidence-interval bonus with covering numbers `ceil((D / eps)^d1)`.
    Theory(TheoryBonus),
}

impl Default for BonusConfig {
    fn default() -> Self {
        BonusConfig::Experiment { c: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBonus {
    pub delta: f64,
    /// Covering dimension of the state-action space.
    pub d1: f64,
    /// Covering dimension of the state space (only used by the tuner).
    #[serde(default)]
    pub d2: f64,
    pub lip_reward: f64,
    pub lip_transition: f64,
    pub num_episodes: usize,
    /// Diameter of the state-action space.
    #[serde(default = "unit")]
    pub diameter: f64,
    /// Overrides the covering number (e.g. `X * A` for finite spaces).
    #[serde(default)]
    pub covering: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

impl BonusConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("bonus constant {name} must be >= 0, got {v}")))
            }
        };
        match *self {
            BonusConfig::Experiment { c } => nonneg("c", c),
            BonusConfig::Simple { c1, c2, c3 } => {
                nonneg("c1", c1)?;
                nonneg("c2", c2)?;
                nonneg("c3", c3)
            }
            BonusConfig::Theory(t) => {
                if !(t.delta > 0.0 && t.delta < 1.0) {
                    return Err(Error::InvalidConfig(format!("delta must lie in (0, 1), got {}", t.delta)));
                }
                nonneg("d1", t.d1)?;
                nonneg("d2", t.d2)?;
                nonneg("lip_reward", t.lip_reward)?;
                nonneg("lip_transition", t.lip_transition)?;
                if t.diameter <= 0.0 || t.num_episodes == 0 {
                    return Err(Error::InvalidConfig("diameter and num_episodes must be positive".into()));
                }
                Ok(())
            }
        }
    }
}

/// Everything besides `C` and `k` that a bonus depends on.
#[derive(Debug, Clone, Copy)]
pub struct BonusContext {
    pub config: BonusConfig,
    pub horizon: usize,
    pub beta: f64,
    pub sigma: f64,
    pub lip_q: f64,
    /// `(C1, C2)` of the spatial kernel.
    pub kernel_constants: (f64, f64),
}

impl BonusContext {
    pub fn new(config: BonusConfig, horizon: usize, kernel: &KernelSpec, lip_q: f64) -> Self {
        BonusContext {
            config,
            horizon,
            beta: kernel.beta,
            sigma: kernel.spatial.sigma(),
            lip_q,
            kernel_constants: kernel.spatial.envelope_constants(),
        }
    }

    /// Bonus at a pair whose generalized count is `count` (`C >= beta`), in
    /// 0-based episode `episode`.
    pub fn bonus(&self, count: f64, episode: usize) -> f64 {
        let h = self.horizon as f64;
        let beta = self.beta;
        match self.config {
            BonusConfig::Experiment { c } => c / count.sqrt() + beta * h / count,
            BonusConfig::Simple { c1, c2, c3 } => {
                c1 * h / count.sqrt() + c2 * beta * h / count + c3 * self.lip_q * self.sigma
            }
            BonusConfig::Theory(t) => self.theory_bonus(&t, count, (episode + 1) as f64),
        }
    }

    fn theory_bonus(&self, t: &TheoryBonus, count: f64, k: f64) -> f64 {
        let h = self.horizon as f64;
        let beta = self.beta;
        let sigma = self.sigma;
        let (c1, c2) = self.kernel_constants;
        let kk = t.num_episodes as f64;
        let covering = |eps: f64| -> f64 {
            if let Some(n) = t.covering {
                return n;
            }
            if t.d1 == 0.0 || eps <= 0.0 {
                return 1.0;
            }
            (t.diameter / eps).powf(t.d1).ceil().max(1.0)
        };
        let delta = t.delta / 8.0;
        let growth = (1.0 + k / beta).sqrt();
        let log_r = (covering(sigma * sigma / kk) * growth / delta).ln();
        let log_p = (h * covering(sigma * sigma / (kk * h)) * growth / delta).ln();
        let log_plus = |z: f64| (z + std::f64::consts::E).ln();
        let smooth = |log_term: f64| c2 / (2.0 * beta.powf(1.5)) * (2.0 * log_term).sqrt() + 4.0 * c2 / beta;
        let bias_tail = 1.0 + log_plus(c1 * k / beta).sqrt();
        let b_r = smooth(log_r) + 2.0 * t.lip_reward * self.lip_q * bias_tail;
        let b_p = smooth(log_p) + 2.0 * t.lip_transition * self.lip_q * bias_tail;
        let reward_part = (2.0 * log_r / count).sqrt() + beta / count + b_r * sigma;
        let transition_part = (2.0 * h * h * log_p / count).sqrt() + beta * h / count + b_p * sigma;
        reward_part + transition_part
    }
}
