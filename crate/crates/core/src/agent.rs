//! Agent interface shared by the full and representative-state learners.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{ActionId, Point};

/// One observed transition `(x_h^s, a_h^s, x_{h+1}^s, r_h^s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub episode: usize,
    pub step: usize,
    pub state: Point,
    pub action: ActionId,
    pub next_state: Point,
    pub reward: f64,
}

impl TransitionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(Error::InvalidInput(format!("reward {} outside [0, 1]", self.reward)));
        }
        Ok(())
    }
}

/// Checks that `(episode, step)` strictly increases along a record stream.
#[derive(Debug, Clone, Default)]
pub(crate) struct StreamOrder {
    last: Option<(usize, usize)>,
}

impl StreamOrder {
    pub(crate) fn advance(&mut self, record: &TransitionRecord) -> Result<()> {
        let key = (record.episode, record.step);
        if let Some(last) = self.last {
            if key <= last {
                return Err(Error::InvalidInput(format!(
                    "out-of-order record (episode {}, step {}) after (episode {}, step {})",
                    key.0, key.1, last.0, last.1
                )));
            }
        }
        self.last = Some(key);
        Ok(())
    }
}

pub trait Agent: Send {
    fn name(&self) -> &str;

    /// Recomputes the optimistic Q-functions from data of episodes `< episode`.
    fn plan(&mut self, episode: usize);

    /// Greedy action at `(step, state)`; ties go to the lowest action id.
    fn act(&self, step: usize, state: &Point) -> ActionId;

    fn observe(&mut self, record: TransitionRecord) -> Result<()>;

    /// Change-point notification, only meaningful for restart baselines.
    fn notify_change(&mut self, _episode: usize) -> Result<()> {
        Err(Error::InvalidConfig(format!("agent {} has no restart support", self.name())))
    }

    fn supports_restart(&self) -> bool {
        false
    }

    /// Model-table cells written since the last call.
    fn take_write_count(&mut self) -> u64 {
        0
    }
}

/// Argmax with ties broken by the lowest index.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_value {
            best = i;
            best_value = v;
        }
    }
    best
}
