//! The full kernel-based agent: keeps every transition and recomputes the
//! weighted model from scratch before each episode (`O(k^2)` per episode).

use serde::{Deserialize, Serialize};

use crate::agent::{argmax, Agent, StreamOrder, TransitionRecord};
use crate::bonus::{BonusConfig, BonusContext};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::metric::{ActionId, MetricSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernsParams {
    pub horizon: usize,
    pub num_actions: usize,
    /// Lipschitz constant used by the interpolation step.
    pub lip_q: f64,
    pub kernel: KernelSpec,
    pub bonus: BonusConfig,
    pub metric: MetricSpec,
}

impl KernsParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.num_actions == 0 {
            return Err(Error::InvalidConfig("horizon and action count must be >= 1".into()));
        }
        if !(self.lip_q >= 0.0) {
            return Err(Error::InvalidConfig(format!("Lipschitz constant must be >= 0, got {}", self.lip_q)));
        }
        self.kernel.validate()?;
        self.bonus.validate()
    }
}

/// `L1 = sum_{h'} L_r L_p^{H - h'}` over `h' = 1..H`, the Lipschitz constant
/// of the optimal Q-functions at the first step.
pub fn default_lipschitz(horizon: usize, lip_reward: f64, lip_transition: f64) -> f64 {
    (1..=horizon)
        .map(|hp| lip_reward * lip_transition.powi((horizon - hp) as i32))
        .sum()
}

/// Kernel weights of the records of episodes `< episode` with respect to
/// `query`, and the generalized count `C = beta + sum w`.
pub fn weights_and_count(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    history: &[TransitionRecord],
    query: (&Point, ActionId),
    episode: usize,
) -> (Vec<f64>, f64) {
    let mut count = kernel.beta;
    let weights: Vec<f64> = history
        .iter()
        .take_while(|r| r.episode < episode)
        .map(|r| {
            let dist = metric.pair_distance(query, (&r.state, r.action));
            let w = kernel.weight(episode - r.episode - 1, dist);
            count += w;
            w
        })
        .collect();
    (weights, count)
}

/// `sum_s w~_s r_s`.
pub fn estimate_reward(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    history: &[TransitionRecord],
    query: (&Point, ActionId),
    episode: usize,
) -> f64 {
    let (weights, count) = weights_and_count(kernel, metric, history, query, episode);
    weights.iter().zip(history).map(|(w, r)| w * r.reward).sum::<f64>() / count
}

/// `sum_s w~_s V(x_{h+1}^s)`: the (sub-probability) transition estimate
/// applied to `value`.
pub fn apply_transition_estimate(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    history: &[TransitionRecord],
    query: (&Point, ActionId),
    episode: usize,
    value: impl Fn(&Point) -> f64,
) -> f64 {
    let (weights, count) = weights_and_count(kernel, metric, history, query, episode);
    weights
        .iter()
        .zip(history)
        .map(|(w, r)| w * value(&r.next_state))
        .sum::<f64>()
        / count
}

/// `min_m [ q_m + L1 rho(query, pair_m) ]` over the entries at finite
/// distance from `query`; `default` when there are none.
pub fn lipschitz_interpolate<'a>(
    entries: impl IntoIterator<Item = ((&'a Point, ActionId), f64)>,
    metric: &MetricSpec,
    lip_q: f64,
    query: (&Point, ActionId),
    default: f64,
) -> f64 {
    let mut best = f64::INFINITY;
    for (pair, q) in entries {
        let d = metric.pair_distance(query, pair);
        if d.is_finite() {
            best = best.min(q + lip_q * d);
        }
    }
    if best.is_finite() {
        best
    } else {
        default
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QEntry {
    pub state: Point,
    pub action: ActionId,
    pub value: f64,
}

/// Per-step optimistic values `Q~_h` at visited pairs, plus the interpolation
/// rule that extends them to every pair.
#[derive(Debug, Clone)]
pub struct QTables {
    horizon: usize,
    lip_q: f64,
    metric: MetricSpec,
    steps: Vec<Vec<QEntry>>,
}

impl QTables {
    pub fn optimistic(horizon: usize, lip_q: f64, metric: MetricSpec) -> Self {
        QTables { horizon, lip_q, metric, steps: vec![Vec::new(); horizon] }
    }

    pub fn entries(&self, step: usize) -> &[QEntry] {
        &self.steps[step]
    }

    pub fn clip_bound(&self, step: usize) -> f64 {
        (self.horizon - step) as f64
    }

    /// `Q-bar_h(x, a)`; `H - h` when step `h` has no entries.
    pub fn q_interpolate(&self, step: usize, query: (&Point, ActionId)) -> f64 {
        lipschitz_interpolate(
            self.steps[step].iter().map(|e| ((&e.state, e.action), e.value)),
            &self.metric,
            self.lip_q,
            query,
            self.clip_bound(step),
        )
    }

    /// `V_h(x) = min(H - h, max_a Q-bar_h(x, a))`; zero past the horizon.
    pub fn value(&self, step: usize, state: &Point, num_actions: usize) -> f64 {
        if step >= self.horizon {
            return 0.0;
        }
        let best = (0..num_actions)
            .map(|a| self.q_interpolate(step, (state, a)))
            .fold(f64::NEG_INFINITY, f64::max);
        best.min(self.clip_bound(step))
    }
}

pub struct KernsAgent {
    name: String,
    params: KernsParams,
    bonus: BonusContext,
    history: Vec<Vec<TransitionRecord>>,
    order: StreamOrder,
    q: QTables,
}

impl KernsAgent {
    pub fn new(name: impl Into<String>, params: KernsParams) -> Result<Self> {
        params.validate()?;
        Ok(KernsAgent {
            name: name.into(),
            bonus: BonusContext::new(params.bonus, params.horizon, &params.kernel, params.lip_q),
            history: vec![Vec::new(); params.horizon],
            order: StreamOrder::default(),
            q: QTables::optimistic(params.horizon, params.lip_q, params.metric),
            params,
        })
    }

    pub fn params(&self) -> &KernsParams {
        &self.params
    }

    pub fn history(&self, step: usize) -> &[TransitionRecord] {
        &self.history[step]
    }

    pub fn q_tables(&self) -> &QTables {
        &self.q
    }

    pub fn bonus_context(&self) -> &BonusContext {
        &self.bonus
    }

    /// Kernel backward induction using the records of episodes `< episode`.
    pub fn backward_induction(&self, episode: usize) -> QTables {
        let p = &self.params;
        let mut tables = QTables::optimistic(p.horizon, p.lip_q, p.metric);
        for h in (0..p.horizon).rev() {
            let records: Vec<&TransitionRecord> =
                self.history[h].iter().take_while(|r| r.episode < episode).collect();
            if records.is_empty() {
                continue;
            }
            // V_{h+1} at each observed next state
            let next_values: Vec<f64> = records
                .iter()
                .map(|r| tables.value(h + 1, &r.next_state, p.num_actions))
                .collect();
            let mut entries = Vec::with_capacity(records.len());
            for m in &records {
                let mut count = p.kernel.beta;
                let mut total = 0.0;
                for (s, v) in records.iter().zip(&next_values) {
                    let dist = p.metric.pair_distance((&m.state, m.action), (&s.state, s.action));
                    let w = p.kernel.weight(episode - s.episode - 1, dist);
                    count += w;
                    total += w * (s.reward + v);
                }
                entries.push(QEntry {
                    state: m.state.clone(),
                    action: m.action,
                    value: total / count + self.bonus.bonus(count, episode),
                });
            }
            tables.steps[h] = entries;
        }
        tables
    }
}

impl Agent for KernsAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn plan(&mut self, episode: usize) {
        self.q = self.backward_induction(episode);
    }

    fn act(&self, step: usize, state: &Point) -> ActionId {
        argmax((0..self.params.num_actions).map(|a| self.q.q_interpolate(step, (state, a))))
    }

    fn observe(&mut self, record: TransitionRecord) -> Result<()> {
        record.validate()?;
        if record.step >= self.params.horizon {
            return Err(Error::InvalidInput(format!("step {} beyond horizon", record.step)));
        }
        self.order.advance(&record)?;
        self.history[record.step].push(record);
        Ok(())
    }
}
