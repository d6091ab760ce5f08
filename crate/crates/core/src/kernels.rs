//! Time-dependent kernels `Gamma(t, u, v) = chi(t) * phi(rho(u, v) / sigma)`.
//!
//! `chi` forgets old data (exponential discount, sliding window, or nothing);
//! `phi` measures spatial similarity. A numerical checker verifies the
//! envelope/smoothness/forgetting conditions a kernel must satisfy for the
//! regret analysis to apply.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum TemporalKernel {
    ExpDiscount { eta: f64 },
    SlidingWindow { window: usize },
    Constant,
}

impl TemporalKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TemporalKernel::ExpDiscount { eta } if !(eta > 0.0 && eta <= 1.0) => Err(
                Error::InvalidConfig(format!("discount eta must lie in (0, 1], got {eta}")),
            ),
            TemporalKernel::SlidingWindow { window: 0 } => {
                Err(Error::InvalidConfig("sliding window must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// `chi(t)` for an episode gap `t`.
    #[inline]
    pub fn weight(&self, t: usize) -> f64 {
        match *self {
            TemporalKernel::ExpDiscount { eta } => pow_usize(eta, t),
            TemporalKernel::SlidingWindow { window } => {
                if t < window {
                    1.0
                } else {
                    0.0
                }
            }
            TemporalKernel::Constant => 1.0,
        }
    }

    /// Per-episode decay factor for the online recursions, when one exists.
    pub fn discount(&self) -> Option<f64> {
        match *self {
            TemporalKernel::ExpDiscount { eta } => Some(eta),
            TemporalKernel::Constant => Some(1.0),
            TemporalKernel::SlidingWindow { .. } => None,
        }
    }
}

#[inline]
pub(crate) fn pow_usize(base: f64, exp: usize) -> f64 {
    if exp <= i32::MAX as usize {
        base.powi(exp as i32)
    } else {
        base.powf(exp as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum SpatialKernel {
    /// `exp(-z^2 / 2)`
    GaussianP2 { sigma: f64 },
    /// `exp(-z^4 / 2)`
    ExpP4 { sigma: f64 },
    /// Tabular limit `sigma = 0`: weight 1 on exact matches, 0 elsewhere.
    ExactMatch,
}

impl SpatialKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpatialKernel::GaussianP2 { sigma } | SpatialKernel::ExpP4 { sigma } => {
                if sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "bandwidth must be > 0 for smooth kernels (got {sigma}); use exact_match for sigma = 0"
                    )))
                }
            }
            SpatialKernel::ExactMatch => Ok(()),
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            SpatialKernel::GaussianP2 { sigma } | SpatialKernel::ExpP4 { sigma } => sigma,
            SpatialKernel::ExactMatch => 0.0,
        }
    }

    /// Base profile `phi(z)` as a function of the scaled distance.
    #[inline]
    pub fn profile(&self, z: f64) -> f64 {
        match self {
            SpatialKernel::GaussianP2 { .. } => (-0.5 * z * z).exp(),
            SpatialKernel::ExpP4 { .. } => {
                let z2 = z * z;
                (-0.5 * z2 * z2).exp()
            }
            SpatialKernel::ExactMatch => {
                if z == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// `phi(dist / sigma)`; infinite distances give exactly zero.
    #[inline]
    pub fn weight(&self, dist: f64) -> f64 {
        if dist.is_infinite() {
            return 0.0;
        }
        match *self {
            SpatialKernel::GaussianP2 { sigma } | SpatialKernel::ExpP4 { sigma } => {
                self.profile(dist / sigma)
            }
            SpatialKernel::ExactMatch => self.profile(dist),
        }
    }

    /// Analytic `(C1, C2)` envelope constants in scaled units: the smallest
    /// `C1` with `phi(z) <= C1 exp(-z^2/2)` and the Lipschitz constant of `phi`.
    pub fn envelope_constants(&self) -> (f64, f64) {
        match self {
            SpatialKernel::GaussianP2 { .. } => (1.0, (-0.5f64).exp()),
            // sup exp((z^2 - z^4)/2) at z^2 = 1/2; |phi'| peaks at z^4 = 3/2
            SpatialKernel::ExpP4 { .. } => (
                (0.125f64).exp(),
                2.0 * 1.5f64.powf(0.75) * (-0.75f64).exp(),
            ),
            SpatialKernel::ExactMatch => (1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub temporal: TemporalKernel,
    pub spatial: SpatialKernel,
    pub beta: f64,
}

impl KernelSpec {
    pub fn new(temporal: TemporalKernel, spatial: SpatialKernel, beta: f64) -> Result<Self> {
        let spec = KernelSpec { temporal, spatial, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.temporal.validate()?;
        self.spatial.validate()?;
        if !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "regularizer beta must be > 0, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// `Gamma(t, u, v)` given `t` and `rho(u, v)`.
    #[inline]
    pub fn weight(&self, t: usize, dist: f64) -> f64 {
        let chi = self.temporal.weight(t);
        if chi == 0.0 {
            return 0.0;
        }
        chi * self.spatial.weight(dist)
    }
}

/// Constants found by [`check_assumptions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionConstants {
    pub c1: f64,
    /// Lipschitz constant in scaled units `z = dist / sigma`.
    pub c2: f64,
    pub c3: f64,
    pub g4: f64,
    /// Reference discount and window used for conditions (3) and (4).
    pub eta: f64,
    pub window: usize,
}

impl AssumptionConstants {
    /// `C2` per unit of raw distance.
    pub fn c2_per_distance(&self, sigma: f64) -> f64 {
        self.c2 / sigma
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelCondition {
    GaussianEnvelope,
    Lipschitz,
    ForgetsOldData,
    WeighsRecentData,
    Monotone,
}

impl std::fmt::Display for KernelCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            KernelCondition::GaussianEnvelope => "(1) envelope Gamma(t,z) <= C1 exp(-z^2/2)",
            KernelCondition::Lipschitz => "(2) Lipschitz in z",
            KernelCondition::ForgetsOldData => "(3) Gamma(t,z) <= C3 eta^t for t >= W",
            KernelCondition::WeighsRecentData => "(4) Gamma(t,z) >= G(z) eta^t for t < W with G(4) > 0",
            KernelCondition::Monotone => "(5) non-increasing in z",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelCheckFailure {
    pub condition: KernelCondition,
    pub t: usize,
    pub z: f64,
    pub detail: String,
}

impl std::fmt::Display for KernelCheckFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "condition {} violated at t={}, z={}: {}", self.condition, self.t, self.z, self.detail)
    }
}

/// Default checker grid: `z` in `[0, 8]` with step 0.01.
pub fn default_z_grid() -> Vec<f64> {
    (0..=800).map(|i| i as f64 * 0.01).collect()
}

/// Largest envelope constant `C1` the checker accepts by default.
///
/// Condition (1) only asks for *some* finite `C1`, which a finite grid can
/// never refute, so the checker caps it. Both smooth profiles shipped here
/// sit well below the cap (1 and `e^{1/8}`).
pub const DEFAULT_MAX_C1: f64 = 2.0;

/// Checks the kernel conditions on a grid. `t_max` defaults (when `None`)
/// to `max(2W, 64)`.
pub fn check_assumptions(
    spec: &KernelSpec,
    z_grid: &[f64],
    t_max: Option<usize>,
) -> Result<std::result::Result<AssumptionConstants, KernelCheckFailure>> {
    spec.validate()?;
    let (eta, window) = match spec.temporal {
        TemporalKernel::ExpDiscount { eta } => (eta, None),
        TemporalKernel::SlidingWindow { window } => (1.0, Some(window)),
        TemporalKernel::Constant => (1.0, None),
    };
    let t_max = t_max.unwrap_or_else(|| window.map_or(64, |w| (2 * w).max(64)));
    if let Some(w) = window {
        if t_max < w {
            return Err(Error::InvalidInput(format!("t_max {t_max} must be >= window {w}")));
        }
    }
    // Without a window, split the range so both (3) and (4) are exercised.
    let window = window.unwrap_or(t_max / 2 + 1);
    let spatial = spec.spatial;
    let temporal = spec.temporal;
    let profile = move |t: usize, z: f64| temporal.weight(t) * spatial.profile(z);
    check_profile(&profile, eta, window, z_grid, t_max, DEFAULT_MAX_C1)
}

/// Kernel-agnostic grid check of a base profile `Gamma_bar(t, z)`.
pub fn check_profile(
    profile: &dyn Fn(usize, f64) -> f64,
    eta: f64,
    window: usize,
    z_grid: &[f64],
    t_max: usize,
    max_c1: f64,
) -> Result<std::result::Result<AssumptionConstants, KernelCheckFailure>> {
    if z_grid.len() < 2 || z_grid.windows(2).any(|w| !(w[1] > w[0])) || z_grid[0] < 0.0 {
        return Err(Error::InvalidInput(
            "z grid must be increasing, non-negative and have at least two points".into(),
        ));
    }
    let failure = |condition, t, z, detail: String| Ok(Err(KernelCheckFailure { condition, t, z, detail }));

    let table: Vec<Vec<f64>> = (0..=t_max)
        .map(|t| z_grid.iter().map(|&z| profile(t, z)).collect())
        .collect();

    // (1) smallest envelope constant, with its witness
    let mut c1 = 0.0f64;
    let mut c1_at = (0usize, z_grid[0], 0.0f64);
    for (t, row) in table.iter().enumerate() {
        for (&z, &v) in z_grid.iter().zip(row) {
            if v <= 0.0 {
                continue;
            }
            let envelope = (-0.5 * z * z).exp();
            let ratio = if envelope > 0.0 { v / envelope } else { f64::INFINITY };
            if ratio > c1 {
                c1 = ratio;
                c1_at = (t, z, v);
            }
        }
    }
    if c1 > max_c1 {
        let (t, z, v) = c1_at;
        return failure(
            KernelCondition::GaussianEnvelope,
            t,
            z,
            format!("{v} > exp(-z^2/2) = {:.6} (C1 = {c1:.6} exceeds {max_c1})", (-0.5 * z * z).exp()),
        );
    }

    // (5) monotone and (2) Lipschitz via adjacent differences
    let mut c2 = 0.0f64;
    for (t, row) in table.iter().enumerate() {
        for i in 1..row.len() {
            if row[i] > row[i - 1] {
                return failure(
                    KernelCondition::Monotone,
                    t,
                    z_grid[i],
                    format!("{} > {} at the previous grid point", row[i], row[i - 1]),
                );
            }
            c2 = c2.max((row[i - 1] - row[i]) / (z_grid[i] - z_grid[i - 1]));
        }
    }
    if !(c2 > 0.0) || !c2.is_finite() {
        return failure(KernelCondition::Lipschitz, 0, z_grid[0], format!("C2 = {c2}"));
    }

    // (3) forgetting beyond the window, (4) minimum recent weight
    let i4 = z_grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 4.0).abs().total_cmp(&(b.1 - 4.0).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut c3 = 0.0f64;
    let mut g4 = f64::INFINITY;
    for (t, row) in table.iter().enumerate() {
        let decay = eta.powi(t as i32);
        if t >= window {
            for (&z, &v) in z_grid.iter().zip(row) {
                if v > 0.0 && decay == 0.0 {
                    return failure(KernelCondition::ForgetsOldData, t, z, format!("{v} > 0 = eta^t"));
                }
                if v > 0.0 {
                    c3 = c3.max(v / decay);
                }
            }
        } else {
            g4 = g4.min(row[i4] / decay);
        }
    }
    if !(g4 > 0.0) {
        return failure(KernelCondition::WeighsRecentData, 0, z_grid[i4], format!("G(4) = {g4}"));
    }
    Ok(Ok(AssumptionConstants { c1, c2, c3, g4, eta, window }))
}
