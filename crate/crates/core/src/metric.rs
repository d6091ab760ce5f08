//! Metric state-action spaces.
//!
//! States are either points of `R^d` compared with the Euclidean norm or
//! discrete ids compared with the 0/1 metric. Pairs `(x, a)` use either the
//! `same_action_only` rule (pairs with different actions are infinitely far
//! apart, so kernel weights across actions vanish) or the additive rule
//! `rho_X(x, x') + c_A * 1{a != a'}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A state: a coordinate vector or a discrete id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Coords(Vec<f64>),
    Discrete(usize),
}

impl Point {
    pub fn xy(x: f64, y: f64) -> Self {
        Point::Coords(vec![x, y])
    }

    pub fn coords(&self) -> Option<&[f64]> {
        match self {
            Point::Coords(c) => Some(c),
            Point::Discrete(_) => None,
        }
    }

    /// Coordinates of a planar point.
    pub fn xy_pair(&self) -> Option<(f64, f64)> {
        match self.coords()? {
            [x, y] => Some((*x, *y)),
            _ => None,
        }
    }

    pub fn discrete_id(&self) -> Option<usize> {
        match self {
            Point::Discrete(id) => Some(*id),
            Point::Coords(_) => None,
        }
    }

    pub fn norm(&self) -> f64 {
        match self {
            Point::Coords(c) => c.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Point::Discrete(_) => 0.0,
        }
    }
}

pub type ActionId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMetric {
    Euclidean,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ActionCrossRule {
    SameActionOnly,
    Additive { action_gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub state_metric: StateMetric,
    pub action_cross_rule: ActionCrossRule,
}

impl MetricSpec {
    pub fn euclidean() -> Self {
        MetricSpec {
            state_metric: StateMetric::Euclidean,
            action_cross_rule: ActionCrossRule::SameActionOnly,
        }
    }

    pub fn discrete() -> Self {
        MetricSpec {
            state_metric: StateMetric::Discrete,
            action_cross_rule: ActionCrossRule::SameActionOnly,
        }
    }

    pub fn with_cross_rule(mut self, rule: ActionCrossRule) -> Self {
        self.action_cross_rule = rule;
        self
    }

    /// `rho_X(x, y)`.
    pub fn state_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        match (self.state_metric, x, y) {
            (StateMetric::Euclidean, Point::Coords(a), Point::Coords(b)) => {
                if a.len() != b.len() {
                    return Err(Error::InvalidInput(format!(
                        "dimension mismatch: {} vs {}",
                        a.len(),
                        b.len()
                    )));
                }
                Ok(euclidean(a, b))
            }
            (StateMetric::Discrete, Point::Discrete(a), Point::Discrete(b)) => {
                Ok(if a == b { 0.0 } else { 1.0 })
            }
            _ => Err(Error::InvalidInput(format!(
                "point kind does not match the {:?} metric",
                self.state_metric
            ))),
        }
    }

    /// `rho((x, a), (y, b))`.
    pub fn distance(&self, u: (&Point, ActionId), v: (&Point, ActionId)) -> Result<f64> {
        let d = self.state_distance(u.0, v.0)?;
        Ok(self.combine(d, u.1, v.1))
    }

    /// Unchecked hot-path variant used inside the agents, whose inputs are
    /// validated once at construction.
    #[inline]
    pub(crate) fn pair_distance(&self, u: (&Point, ActionId), v: (&Point, ActionId)) -> f64 {
        if let ActionCrossRule::SameActionOnly = self.action_cross_rule {
            if u.1 != v.1 {
                return f64::INFINITY;
            }
        }
        let d = self.fast_state_distance(u.0, v.0);
        self.combine(d, u.1, v.1)
    }

    #[inline]
    pub(crate) fn fast_state_distance(&self, x: &Point, y: &Point) -> f64 {
        match (x, y) {
            (Point::Coords(a), Point::Coords(b)) => euclidean(a, b),
            (Point::Discrete(a), Point::Discrete(b)) => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            _ => f64::INFINITY,
        }
    }

    #[inline]
    fn combine(&self, state_dist: f64, a: ActionId, b: ActionId) -> f64 {
        match self.action_cross_rule {
            ActionCrossRule::SameActionOnly => {
                if a == b {
                    state_dist
                } else {
                    f64::INFINITY
                }
            }
            ActionCrossRule::Additive { action_gap } => {
                if a == b {
                    state_dist
                } else {
                    state_dist + action_gap
                }
            }
        }
    }
}

#[inline]
fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
