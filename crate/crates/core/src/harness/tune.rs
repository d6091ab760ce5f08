//! Closed-form kernel parameters from the optimized regret bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    R1,
    R2,
}

impl std::str::FromStr for BoundFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "r1" => Ok(BoundFamily::R1),
            "r2" => Ok(BoundFamily::R2),
            other => Err(Error::InvalidConfig(format!("unknown bound family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    pub sigma: f64,
    pub eta: f64,
    pub window: usize,
    pub bound: BoundFamily,
}

/// `W = ceil(log(K / (1 - eta)) / log(1 / eta))`.
pub fn window_for(num_episodes: usize, eta: f64) -> usize {
    ((num_episodes as f64 / (1.0 - eta)).ln() / (1.0 / eta).ln()).ceil() as usize
}

/// Kernel bandwidth, discount and window for `K` episodes with variation
/// budget `delta` and covering dimensions `d1` (state-action) and `d2`
/// (state). `horizon` only enters the R2 discount.
///
/// With `delta = 0` the discount falls back to `1 - 1/K`. With
/// `d1 = d2 = 0` both families use `sigma = 0` and
/// `log(1/eta) = (delta / K)^(2/3)`.
pub fn tune_parameters(
    num_episodes: usize,
    delta: f64,
    d1: f64,
    d2: f64,
    bound: BoundFamily,
    horizon: usize,
) -> Result<TunedParams> {
    if num_episodes < 2 {
        return Err(Error::InvalidConfig("tuning needs K >= 2".into()));
    }
    if !(delta >= 0.0) || !(d1 >= 0.0) || !(d2 >= 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig("delta, d1 and d2 must be finite and >= 0".into()));
    }
    if bound == BoundFamily::R2 && horizon == 0 {
        return Err(Error::InvalidConfig("R2 tuning needs a horizon >= 1".into()));
    }
    let k = num_episodes as f64;
    let d = d1 + d2;
    let (sigma, log_inv_eta) = if d == 0.0 {
        (0.0, (delta / k).powf(2.0 / 3.0))
    } else {
        match bound {
            BoundFamily::R1 => {
                let alpha = 1.0 / (d + 3.0);
                (k.powf(-alpha), (delta / k.powf(1.0 + alpha * d / 2.0)).powf(2.0 / 3.0))
            }
            BoundFamily::R2 => {
                let alpha = 1.0 / (d + 2.0);
                (k.powf(-alpha), (delta / (horizon as f64 * k.powf(1.0 + alpha * d))).sqrt())
            }
        }
    };
    let eta = if delta == 0.0 { 1.0 - 1.0 / k } else { (-log_inv_eta).exp() };
    if !(eta > 0.0) || !(eta < 1.0) {
        return Err(Error::InvalidConfig("variation exceeds horizon budget".into()));
    }
    Ok(TunedParams { sigma, eta, window: window_for(num_episodes, eta), bound })
}
