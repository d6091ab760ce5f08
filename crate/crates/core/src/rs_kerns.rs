//! Kernel-based RL on representative states.
//!
//! Each step `h` keeps an epsilon-separated list of representative
//! state-action pairs and an epsilon_X-separated list of representative next
//! states. Every transition is mapped to its nearest representatives and the
//! compressed model (`W`, `R`, `P` over representatives) is updated online in
//! time independent of the episode index, which makes the per-episode cost
//! constant once the representative sets stop growing.
//!
//! Representatives are stored as a paired list of `(state, action)` pairs
//! rather than a product of separate state and action sets.
//!
//! Online recursions exist for the exponential-discount and constant
//! temporal kernels only. For the discount `eta` the tables obey, for a pair
//! `p` already present and a new transition mapped to `z` with reward `r`
//! and next representative `y~`:
//!
//! ```text
//! W'    = phi(p, z) + eta W
//! R'    = phi(p, z) r / (beta + W') + eta (beta + W) / (beta + W') R
//! P'(y) = phi(p, z) 1{y = y~} / (beta + W') + eta (beta + W) / (beta + W') P(y)
//! ```
//!
//! A pair inserted by the transition is initialized from the auxiliary
//! per-representative counts instead. The auxiliary counts decay lazily: each
//! pair remembers the episode at which its counts were last brought up to
//! date and is rescaled by `eta^(gap)` when read or hit.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{argmax, Agent, StreamOrder, TransitionRecord};
use crate::bonus::{BonusConfig, BonusContext};
use crate::error::{Error, Result};
use crate::kernels::{pow_usize, KernelSpec, TemporalKernel};
use crate::kerns::lipschitz_interpolate;
use crate::metric::{ActionId, MetricSpec, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Lipschitz,
    #[default]
    NearestNeighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsParams {
    pub horizon: usize,
    pub num_actions: usize,
    pub lip_q: f64,
    pub kernel: KernelSpec,
    pub bonus: BonusConfig,
    pub metric: MetricSpec,
    pub epsilon: f64,
    pub epsilon_x: f64,
    pub interpolation: Interpolation,
    /// Keep separate reward-side counts that `notify_change` can reset.
    pub restart: bool,
}

impl RsParams {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.num_actions == 0 {
            return Err(Error::InvalidConfig("horizon and action count must be >= 1".into()));
        }
        if !(self.epsilon >= 0.0) || !(self.epsilon_x >= 0.0) {
            return Err(Error::InvalidConfig("representative thresholds must be >= 0".into()));
        }
        if !(self.lip_q >= 0.0) {
            return Err(Error::InvalidConfig("Lipschitz constant must be >= 0".into()));
        }
        self.kernel.validate()?;
        self.bonus.validate()?;
        discount_of(&self.kernel).map(|_| ())
    }
}

fn discount_of(kernel: &KernelSpec) -> Result<f64> {
    kernel.temporal.discount().ok_or_else(|| {
        Error::InvalidConfig(
            "online representative updates need an exp_discount or constant temporal kernel".into(),
        )
    })
}

/// Representative pairs and next states of one step.
#[derive(Debug, Clone, Default)]
pub struct RepSets {
    pub epsilon: f64,
    pub epsilon_x: f64,
    pairs: Vec<(Point, ActionId)>,
    pair_inserted: Vec<usize>,
    next_states: Vec<Point>,
    next_inserted: Vec<usize>,
}

impl RepSets {
    pub fn new(epsilon: f64, epsilon_x: f64) -> Self {
        RepSets { epsilon, epsilon_x, ..Default::default() }
    }

    pub fn pairs(&self) -> &[(Point, ActionId)] {
        &self.pairs
    }

    pub fn next_states(&self) -> &[Point] {
        &self.next_states
    }

    /// Episode at which each pair was inserted.
    pub fn pair_insertions(&self) -> &[usize] {
        &self.pair_inserted
    }

    pub fn next_insertions(&self) -> &[usize] {
        &self.next_inserted
    }

    /// Nearest stored pair and its distance; ties go to the earliest insertion.
    pub fn nearest_pair(&self, metric: &MetricSpec, query: (&Point, ActionId)) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (x, a)) in self.pairs.iter().enumerate() {
            let d = metric.pair_distance(query, (x, *a));
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    pub fn nearest_next(&self, metric: &MetricSpec, query: &Point) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, y) in self.next_states.iter().enumerate() {
            let d = metric.fast_state_distance(query, y);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best
    }

    /// Projection `zeta` of a pair. Panics on an empty set: callers update
    /// the sets with the transition first.
    pub fn project_pair(&self, metric: &MetricSpec, query: (&Point, ActionId)) -> usize {
        self.nearest_pair(metric, query)
            .expect("projection onto an empty representative set")
            .0
    }

    pub fn project_next(&self, metric: &MetricSpec, query: &Point) -> usize {
        self.nearest_next(metric, query)
            .expect("projection onto an empty representative set")
            .0
    }

    /// Inserts `(x, a)` if it is farther than epsilon from every stored pair,
    /// and `y` if it is farther than epsilon_X from every stored next state.
    pub fn update(
        &mut self,
        metric: &MetricSpec,
        state: &Point,
        action: ActionId,
        next: &Point,
        episode: usize,
    ) -> (bool, bool) {
        let pair_added = self
            .nearest_pair(metric, (state, action))
            .is_none_or(|(_, d)| d > self.epsilon);
        if pair_added {
            self.pairs.push((state.clone(), action));
            self.pair_inserted.push(episode);
        }
        let next_added = self
            .nearest_next(metric, next)
            .is_none_or(|(_, d)| d > self.epsilon_x);
        if next_added {
            self.next_states.push(next.clone());
            self.next_inserted.push(episode);
        }
        (pair_added, next_added)
    }
}

/// A transition as seen by the compressed model: the representatives it was
/// mapped to when it arrived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedRecord {
    pub episode: usize,
    pub pair: usize,
    pub next: usize,
    pub reward: f64,
}

/// The weight/reward/transition tables over the representatives.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelTables {
    pub w: Vec<f64>,
    pub r: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    /// Reward-side weights (equal to `w` when restarts are disabled).
    pub w_reward: Vec<f64>,
}

/// Compressed model of one step, maintained online.
#[derive(Debug, Clone)]
pub struct RepresentativeModel {
    beta: f64,
    eta: f64,
    restart: bool,
    w: Vec<f64>,
    r: Vec<f64>,
    p: Vec<Vec<f64>>,
    w_reward: Vec<f64>,
    aux_next: Vec<Vec<f64>>,
    aux_count: Vec<f64>,
    aux_reward_sum: Vec<f64>,
    aux_reward_count: Vec<f64>,
    aux_stamp: Vec<usize>,
    last_update: Option<usize>,
    writes: u64,
}

impl RepresentativeModel {
    pub fn new(kernel: &KernelSpec, restart: bool) -> Result<Self> {
        kernel.validate()?;
        Ok(RepresentativeModel {
            beta: kernel.beta,
            eta: discount_of(kernel)?,
            restart,
            w: Vec::new(),
            r: Vec::new(),
            p: Vec::new(),
            w_reward: Vec::new(),
            aux_next: Vec::new(),
            aux_count: Vec::new(),
            aux_reward_sum: Vec::new(),
            aux_reward_count: Vec::new(),
            aux_stamp: Vec::new(),
            last_update: None,
            writes: 0,
        })
    }

    pub fn weight(&self, pair: usize) -> f64 {
        self.w[pair]
    }

    pub fn reward(&self, pair: usize) -> f64 {
        self.r[pair]
    }

    pub fn transition(&self, pair: usize) -> &[f64] {
        &self.p[pair]
    }

    /// Weight driving the reward estimate and the bonus.
    pub fn reward_weight(&self, pair: usize) -> f64 {
        if self.restart {
            self.w_reward[pair]
        } else {
            self.w[pair]
        }
    }

    pub fn tables(&self) -> ModelTables {
        ModelTables {
            w: self.w.clone(),
            r: self.r.clone(),
            p: self.p.clone(),
            w_reward: if self.restart { self.w_reward.clone() } else { self.w.clone() },
        }
    }

    pub fn take_writes(&mut self) -> u64 {
        std::mem::take(&mut self.writes)
    }

    fn decay(&self, from: usize, to: usize) -> f64 {
        pow_usize(self.eta, to - from)
    }

    /// Online update with one transition. The representative sets must
    /// already contain the transition's insertions, reported through the
    /// two flags.
    #[allow(clippy::too_many_arguments)]
    pub fn online_update(
        &mut self,
        reps: &RepSets,
        kernel: &KernelSpec,
        metric: &MetricSpec,
        record: &TransitionRecord,
        pair_added: bool,
        next_added: bool,
    ) -> ProjectedRecord {
        let k = record.episode;
        let num_next = reps.next_states.len();
        let old_pairs = self.w.len();
        debug_assert_eq!(old_pairs + pair_added as usize, reps.pairs.len());

        if next_added {
            for row in self.p.iter_mut().chain(self.aux_next.iter_mut()) {
                row.push(0.0);
            }
            self.writes += 2 * old_pairs as u64;
        }
        if pair_added {
            self.w.push(0.0);
            self.r.push(0.0);
            self.p.push(vec![0.0; num_next]);
            self.aux_next.push(vec![0.0; num_next]);
            self.aux_count.push(0.0);
            self.aux_reward_sum.push(0.0);
            self.aux_stamp.push(k);
            if self.restart {
                self.w_reward.push(0.0);
                self.aux_reward_count.push(0.0);
            }
        }

        let z = reps.project_pair(metric, (&record.state, record.action));
        let y = reps.project_next(metric, &record.next_state);
        let reward = record.reward;

        // auxiliary counts of the hit representative
        let f = self.decay(self.aux_stamp[z], k);
        for v in self.aux_next[z].iter_mut() {
            *v *= f;
        }
        self.aux_next[z][y] += 1.0;
        self.aux_count[z] = 1.0 + f * self.aux_count[z];
        self.aux_reward_sum[z] = reward + f * self.aux_reward_sum[z];
        self.aux_stamp[z] = k;
        self.writes += num_next as u64 + 2;
        if self.restart {
            self.aux_reward_count[z] = 1.0 + f * self.aux_reward_count[z];
            self.writes += 1;
        }

        // pairs present before this transition
        let d = self.last_update.map_or(1.0, |last| self.decay(last, k));
        let beta = self.beta;
        let (zx, za) = (&reps.pairs[z].0, reps.pairs[z].1);
        for i in 0..old_pairs {
            let (px, pa) = (&reps.pairs[i].0, reps.pairs[i].1);
            let phi = kernel.spatial.weight(metric.pair_distance((px, pa), (zx, za)));
            let w_old = self.w[i];
            let w_new = phi + d * w_old;
            let denom = beta + w_new;
            let ratio = d * (beta + w_old) / denom;
            let row = &mut self.p[i];
            for v in row.iter_mut() {
                *v *= ratio;
            }
            row[y] += phi / denom;
            self.w[i] = w_new;
            if self.restart {
                let wr_old = self.w_reward[i];
                let wr_new = phi + d * wr_old;
                self.r[i] = phi * reward / (beta + wr_new) + d * (beta + wr_old) / (beta + wr_new) * self.r[i];
                self.w_reward[i] = wr_new;
                self.writes += 1;
            } else {
                self.r[i] = phi * reward / denom + ratio * self.r[i];
            }
            self.writes += num_next as u64 + 2;
        }

        // a pair inserted by this transition starts from the auxiliary counts
        if pair_added {
            let new = old_pairs;
            let (nx, na) = (&reps.pairs[new].0, reps.pairs[new].1);
            let mut w = 0.0;
            let mut w_reward = 0.0;
            let mut reward_sum = 0.0;
            let mut mass = vec![0.0; num_next];
            for q in 0..reps.pairs.len() {
                let phi = kernel
                    .spatial
                    .weight(metric.pair_distance((nx, na), (&reps.pairs[q].0, reps.pairs[q].1)));
                if phi == 0.0 {
                    continue;
                }
                let scale = phi * self.decay(self.aux_stamp[q], k);
                w += scale * self.aux_count[q];
                reward_sum += scale * self.aux_reward_sum[q];
                if self.restart {
                    w_reward += scale * self.aux_reward_count[q];
                }
                for (m, &c) in mass.iter_mut().zip(&self.aux_next[q]) {
                    *m += scale * c;
                }
            }
            let denom = beta + w;
            for m in mass.iter_mut() {
                *m /= denom;
            }
            self.w[new] = w;
            self.p[new] = mass;
            if self.restart {
                self.w_reward[new] = w_reward;
                self.r[new] = reward_sum / (beta + w_reward);
                self.writes += 1;
            } else {
                self.r[new] = reward_sum / denom;
            }
            self.writes += num_next as u64 + 2;
        }

        self.last_update = Some(k);
        ProjectedRecord { episode: k, pair: z, next: y, reward }
    }

    /// Forgets all reward statistics; transition statistics persist.
    pub fn reset_rewards(&mut self) -> Result<()> {
        if !self.restart {
            return Err(Error::InvalidConfig("model was built without restart support".into()));
        }
        for v in self
            .r
            .iter_mut()
            .chain(self.w_reward.iter_mut())
            .chain(self.aux_reward_sum.iter_mut())
            .chain(self.aux_reward_count.iter_mut())
        {
            *v = 0.0;
        }
        Ok(())
    }
}

/// Recomputes the compressed model from its defining sums over the projected
/// history. Reward sums only include records of episodes `>= reward_since`.
pub fn batch_recompute(
    kernel: &KernelSpec,
    metric: &MetricSpec,
    reps: &RepSets,
    log: &[ProjectedRecord],
    reward_since: usize,
) -> Result<ModelTables> {
    let eta = discount_of(kernel)?;
    let beta = kernel.beta;
    let Some(last) = log.last().map(|r| r.episode) else {
        return Ok(ModelTables::default());
    };
    let n_pairs = reps.pairs.len();
    let n_next = reps.next_states.len();
    let mut out = ModelTables {
        w: vec![0.0; n_pairs],
        r: vec![0.0; n_pairs],
        p: vec![vec![0.0; n_next]; n_pairs],
        w_reward: vec![0.0; n_pairs],
    };
    for (i, (x, a)) in reps.pairs.iter().enumerate() {
        let mut w = 0.0;
        let mut w_reward = 0.0;
        let mut reward_sum = 0.0;
        let mut mass = vec![0.0; n_next];
        for rec in log {
            let (zx, za) = &reps.pairs[rec.pair];
            let weight = pow_usize(eta, last - rec.episode) * kernel.spatial.weight(metric.pair_distance((x, *a), (zx, *za)));
            w += weight;
            mass[rec.next] += weight;
            if rec.episode >= reward_since {
                w_reward += weight;
                reward_sum += weight * rec.reward;
            }
        }
        out.w[i] = w;
        out.w_reward[i] = w_reward;
        out.r[i] = reward_sum / (beta + w_reward);
        out.p[i] = mass.into_iter().map(|m| m / (beta + w)).collect();
    }
    Ok(out)
}

/// One step's representatives, model and projected history.
#[derive(Debug, Clone)]
pub struct StepState {
    pub reps: RepSets,
    pub model: RepresentativeModel,
    pub log: Vec<ProjectedRecord>,
    /// `Q~` at each representative pair from the latest plan.
    q: Vec<f64>,
    /// For each next state of this step and each action, the nearest pair of
    /// the following step and its distance.
    next_projection: Vec<Vec<Option<(usize, f64)>>>,
}

pub struct RsKernsAgent {
    name: String,
    params: RsParams,
    bonus: BonusContext,
    steps: Vec<StepState>,
    order: StreamOrder,
    reward_since: usize,
    inserted_this_episode: usize,
    pair_scratch: Vec<f64>,
}

impl RsKernsAgent {
    pub fn new(name: impl Into<String>, params: RsParams) -> Result<Self> {
        params.validate()?;
        let step = StepState {
            reps: RepSets::new(params.epsilon, params.epsilon_x),
            model: RepresentativeModel::new(&params.kernel, params.restart)?,
            log: Vec::new(),
            q: Vec::new(),
            next_projection: Vec::new(),
        };
        Ok(RsKernsAgent {
            name: name.into(),
            bonus: BonusContext::new(params.bonus, params.horizon, &params.kernel, params.lip_q),
            steps: vec![step; params.horizon],
            order: StreamOrder::default(),
            reward_since: 0,
            inserted_this_episode: 0,
            pair_scratch: Vec::new(),
            params,
        })
    }

    pub fn params(&self) -> &RsParams {
        &self.params
    }

    pub fn step_state(&self, step: usize) -> &StepState {
        &self.steps[step]
    }

    /// First episode whose rewards count after the latest restart.
    pub fn reward_since(&self) -> usize {
        self.reward_since
    }

    pub fn q_values(&self, step: usize) -> &[f64] {
        &self.steps[step].q
    }

    /// Representatives inserted since the last call.
    pub fn take_insertions(&mut self) -> usize {
        std::mem::take(&mut self.inserted_this_episode)
    }

    fn clip_bound(&self, step: usize) -> f64 {
        (self.params.horizon - step) as f64
    }

    /// `Q-bar_h(x, a)` from the latest plan.
    pub fn q_interpolate(&self, step: usize, query: (&Point, ActionId)) -> f64 {
        // representatives added after the latest plan are not valued yet
        let n = self.steps[step].q.len();
        self.interpolate_over(step, query, n, self.clip_bound(step))
    }

    fn interpolate_over(&self, step: usize, query: (&Point, ActionId), n: usize, default: f64) -> f64 {
        let st = &self.steps[step];
        let metric = &self.params.metric;
        match self.params.interpolation {
            Interpolation::Lipschitz => lipschitz_interpolate(
                st.reps.pairs[..n].iter().map(|(x, a)| (x, *a)).zip(st.q.iter().copied()),
                metric,
                self.params.lip_q,
                query,
                default,
            ),
            Interpolation::NearestNeighbor => {
                let mut best: Option<(usize, f64)> = None;
                for (i, (x, a)) in st.reps.pairs[..n].iter().enumerate() {
                    let d = metric.pair_distance(query, (x, *a));
                    if d.is_finite() && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
                best.map_or(default, |(i, _)| st.q[i])
            }
        }
    }

    /// Backward induction over the representatives using the model built
    /// from episodes `< episode`.
    pub fn backward_induction(&mut self, episode: usize) {
        let horizon = self.params.horizon;
        let num_actions = self.params.num_actions;
        let mut next_values: Vec<f64> = Vec::new();
        for h in (0..horizon).rev() {
            // V_{h+1} at the next states of step h
            next_values.clear();
            let n_next = self.steps[h].reps.next_states.len();
            if h + 1 < horizon {
                let cap = self.clip_bound(h + 1);
                for yi in 0..n_next {
                    let best = match self.params.interpolation {
                        Interpolation::NearestNeighbor => {
                            let following = &self.steps[h + 1];
                            self.steps[h].next_projection[yi]
                                .iter()
                                .map(|proj| proj.map_or(cap, |(i, _)| following.q[i]))
                                .fold(f64::NEG_INFINITY, f64::max)
                        }
                        Interpolation::Lipschitz => {
                            let y = &self.steps[h].reps.next_states[yi];
                            (0..num_actions)
                                .map(|a| self.q_interpolate(h + 1, (y, a)))
                                .fold(f64::NEG_INFINITY, f64::max)
                        }
                    };
                    next_values.push(best.min(cap));
                }
            } else {
                next_values.resize(n_next, 0.0);
            }

            let st = &self.steps[h];
            let n_pairs = st.reps.pairs.len();
            let mut q = std::mem::take(&mut self.pair_scratch);
            q.clear();
            for i in 0..n_pairs {
                let expected: f64 = st.model.p[i].iter().zip(&next_values).map(|(p, v)| p * v).sum();
                let count = self.params.kernel.beta + st.model.reward_weight(i);
                q.push(st.model.r[i] + expected + self.bonus.bonus(count, episode));
            }
            self.pair_scratch = std::mem::replace(&mut self.steps[h].q, q);
        }
    }

    fn refresh_projections_for_new_next(&mut self, h: usize) {
        if h + 1 >= self.params.horizon {
            self.steps[h].next_projection.push(Vec::new());
            return;
        }
        let metric = self.params.metric;
        let y = self.steps[h].reps.next_states.last().expect("just inserted").clone();
        let following = &self.steps[h + 1].reps;
        let proj = (0..self.params.num_actions)
            .map(|a| {
                let mut best: Option<(usize, f64)> = None;
                for (i, (x, b)) in following.pairs.iter().enumerate() {
                    let d = metric.pair_distance((&y, a), (x, *b));
                    if d.is_finite() && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((i, d));
                    }
                }
                best
            })
            .collect();
        self.steps[h].next_projection.push(proj);
    }

    fn refresh_projections_for_new_pair(&mut self, h: usize) {
        if h == 0 {
            return;
        }
        let metric = self.params.metric;
        let (prev, cur) = self.steps.split_at_mut(h);
        let prev = &mut prev[h - 1];
        let idx = cur[0].reps.pairs.len() - 1;
        let (px, pa) = &cur[0].reps.pairs[idx];
        for (y, proj) in prev.reps.next_states.iter().zip(prev.next_projection.iter_mut()) {
            for (a, slot) in proj.iter_mut().enumerate() {
                let d = metric.pair_distance((y, a), (px, *pa));
                if d.is_finite() && slot.is_none_or(|(_, bd)| d < bd) {
                    *slot = Some((idx, d));
                }
            }
        }
    }

    /// Writes the representative sets as CSV:
    /// `h,kind,action,x0,...,inserted_episode` (`action` empty for next states).
    pub fn dump_representatives(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let dim = self
            .steps
            .iter()
            .flat_map(|s| s.reps.pairs.iter().map(|(x, _)| x))
            .next()
            .map_or(1, |x| x.coords().map_or(1, |c| c.len()));
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
        let mut header = vec!["h".to_string(), "kind".into(), "action".into()];
        header.extend((0..dim).map(|i| format!("x{i}")));
        header.push("inserted_episode".into());
        w.write_record(&header).map_err(csv_err)?;
        let coords = |p: &Point| -> Vec<String> {
            match p {
                Point::Coords(c) => c.iter().map(|v| format!("{v:.6}")).collect(),
                Point::Discrete(id) => vec![id.to_string()],
            }
        };
        for (h, st) in self.steps.iter().enumerate() {
            for ((x, a), ep) in st.reps.pairs.iter().zip(&st.reps.pair_inserted) {
                let mut row = vec![h.to_string(), "pair".into(), a.to_string()];
                row.extend(coords(x));
                row.push(ep.to_string());
                w.write_record(&row).map_err(csv_err)?;
            }
            for (y, ep) in st.reps.next_states.iter().zip(&st.reps.next_inserted) {
                let mut row = vec![h.to_string(), "next".into(), String::new()];
                row.extend(coords(y));
                row.push(ep.to_string());
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.into_inner()
            .map_err(|e| Error::io(path, e.into_error()))?
            .flush()
            .map_err(|e| Error::io(path, e))
    }
}

impl Agent for RsKernsAgent {
    fn name(&self) -> &str {
        &self.name
    }

    fn plan(&mut self, episode: usize) {
        self.backward_induction(episode);
    }

    fn act(&self, step: usize, state: &Point) -> ActionId {
        argmax((0..self.params.num_actions).map(|a| self.q_interpolate(step, (state, a))))
    }

    fn observe(&mut self, record: TransitionRecord) -> Result<()> {
        record.validate()?;
        let h = record.step;
        if h >= self.params.horizon {
            return Err(Error::InvalidInput(format!("step {h} beyond horizon")));
        }
        self.order.advance(&record)?;
        let metric = self.params.metric;
        let kernel = self.params.kernel;
        let (pair_added, next_added) =
            self.steps[h]
                .reps
                .update(&metric, &record.state, record.action, &record.next_state, record.episode);
        if next_added {
            self.refresh_projections_for_new_next(h);
        }
        if pair_added {
            self.refresh_projections_for_new_pair(h);
        }
        self.inserted_this_episode += pair_added as usize + next_added as usize;
        let st = &mut self.steps[h];
        let projected = st.model.online_update(&st.reps, &kernel, &metric, &record, pair_added, next_added);
        st.log.push(projected);
        Ok(())
    }

    fn notify_change(&mut self, episode: usize) -> Result<()> {
        if !self.params.restart {
            return Err(Error::InvalidConfig(format!("agent {} has no restart support", self.name)));
        }
        for st in &mut self.steps {
            st.model.reset_rewards()?;
        }
        self.reward_since = episode;
        Ok(())
    }

    fn supports_restart(&self) -> bool {
        self.params.restart
    }

    fn take_write_count(&mut self) -> u64 {
        self.steps.iter_mut().map(|s| s.model.take_writes()).sum()
    }
}

/// Representative-state agent with a stationary kernel (`chi = 1`).
pub fn make_rs_kernel_ucbvi(name: impl Into<String>, mut params: RsParams) -> Result<RsKernsAgent> {
    params.kernel.temporal = TemporalKernel::Constant;
    RsKernsAgent::new(name, params)
}

/// Stationary representative-state agent that resets its reward estimates
/// and bonuses when told the environment changed.
pub fn make_restart_baseline(name: impl Into<String>, mut params: RsParams) -> Result<RsKernsAgent> {
    params.kernel.temporal = TemporalKernel::Constant;
    params.restart = true;
    RsKernsAgent::new(name, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::SpatialKernel;
    use crate::metric::{ActionCrossRule, StateMetric};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const M: MetricSpec = MetricSpec {
        state_metric: StateMetric::Euclidean,
        action_cross_rule: ActionCrossRule::SameActionOnly,
    };

    fn rec(episode: usize, step: usize, x: f64, a: ActionId, next: f64, reward: f64) -> TransitionRecord {
        TransitionRecord {
            episode,
            step,
            state: Point::xy(x, 0.0),
            action: a,
            next_state: Point::xy(next, 0.0),
            reward,
        }
    }

    fn kernel(temporal: TemporalKernel, sigma: f64, beta: f64) -> KernelSpec {
        KernelSpec { temporal, spatial: SpatialKernel::GaussianP2 { sigma }, beta }
    }

    fn params(kernel: KernelSpec, horizon: usize, epsilon: f64) -> RsParams {
        RsParams {
            horizon,
            num_actions: 2,
            lip_q: 1.0,
            kernel,
            bonus: BonusConfig::Experiment { c: 0.1 },
            metric: M,
            epsilon,
            epsilon_x: epsilon,
            interpolation: Interpolation::NearestNeighbor,
            restart: false,
        }
    }

    fn feed(model: &mut RepresentativeModel, reps: &mut RepSets, k: &KernelSpec, r: &TransitionRecord) -> ProjectedRecord {
        let (pa, na) = reps.update(&M, &r.state, r.action, &r.next_state, r.episode);
        model.online_update(reps, k, &M, r, pa, na)
    }

    fn random_stream(rng: &mut ChaCha8Rng, len: usize) -> Vec<TransitionRecord> {
        (0..len)
            .map(|e| TransitionRecord {
                episode: e,
                step: 0,
                state: Point::xy(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                action: rng.random_range(0..2),
                next_state: Point::xy(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                reward: rng.random_range(0.0..=1.0),
            })
            .collect()
    }

    fn max_diff(a: &ModelTables, b: &ModelTables) -> f64 {
        let mut m: f64 = 0.0;
        for (x, y) in a.w.iter().zip(&b.w).chain(a.r.iter().zip(&b.r)).chain(a.w_reward.iter().zip(&b.w_reward)) {
            m = m.max((x - y).abs());
        }
        for (ra, rb) in a.p.iter().zip(&b.p) {
            assert_eq!(ra.len(), rb.len());
            for (x, y) in ra.iter().zip(rb) {
                m = m.max((x - y).abs());
            }
        }
        m
    }

    #[test]
    fn projection_examples() {
        let mut reps = RepSets::new(0.0, 0.0);
        reps.update(&M, &Point::xy(0.0, 0.0), 0, &Point::xy(0.0, 0.0), 0);
        assert_eq!(reps.project_pair(&M, (&Point::xy(0.7, 0.2), 0)), 0);

        reps.update(&M, &Point::xy(1.0, 0.0), 0, &Point::xy(0.0, 0.0), 1);
        assert_eq!(reps.project_pair(&M, (&Point::xy(0.5, 0.0), 0)), 0);

        let mut reps = RepSets::new(0.0, 0.0);
        reps.update(&M, &Point::xy(0.3, 0.0), 0, &Point::xy(0.0, 0.0), 0);
        reps.update(&M, &Point::xy(0.1, 0.0), 0, &Point::xy(0.0, 0.0), 1);
        assert_eq!(reps.project_pair(&M, (&Point::xy(0.0, 0.0), 0)), 1);
    }

    #[test]
    fn insertion_is_strict() {
        let mut reps = RepSets::new(0.5, 0.5);
        assert_eq!(reps.update(&M, &Point::xy(0.0, 0.0), 0, &Point::xy(0.0, 0.0), 0), (true, true));
        assert_eq!(reps.update(&M, &Point::xy(0.5, 0.0), 0, &Point::xy(0.5, 0.0), 1), (false, false));
        assert_eq!(reps.update(&M, &Point::xy(0.75, 0.0), 0, &Point::xy(0.75, 0.0), 2), (true, true));
        // a different action is infinitely far under the same-action rule
        assert_eq!(reps.update(&M, &Point::xy(0.0, 0.0), 1, &Point::xy(0.0, 0.0), 3), (true, false));
        assert_eq!(reps.pair_insertions(), &[0, 2, 3]);
    }

    #[test]
    fn first_record_tables() {
        let k = kernel(TemporalKernel::ExpDiscount { eta: 0.9 }, 0.1, 0.01);
        let mut model = RepresentativeModel::new(&k, false).unwrap();
        let mut reps = RepSets::new(0.1, 0.1);
        feed(&mut model, &mut reps, &k, &rec(0, 0, 0.0, 0, 0.5, 0.7));
        assert_eq!(model.weight(0), 1.0);
        assert!((model.reward(0) - 0.7 / 1.01).abs() < 1e-15);
        assert!((model.transition(0)[0] - 1.0 / 1.01).abs() < 1e-15);
        assert_eq!(model.aux_count[0], 1.0);
        assert_eq!(model.aux_reward_sum[0], 0.7);
    }

    #[test]
    fn discounted_repeat_hit() {
        let k = kernel(TemporalKernel::ExpDiscount { eta: 0.5 }, 0.1, 1e-300);
        let mut model = RepresentativeModel::new(&k, false).unwrap();
        let mut reps = RepSets::new(0.1, 0.1);
        feed(&mut model, &mut reps, &k, &rec(0, 0, 0.0, 0, 0.0, 1.0));
        feed(&mut model, &mut reps, &k, &rec(1, 0, 0.0, 0, 0.0, 0.0));
        assert!((model.weight(0) - 1.5).abs() < 1e-15);
        assert!((model.reward(0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_kernel_far_pairs_count_hits() {
        let k = kernel(TemporalKernel::Constant, 0.01, 0.01);
        let mut model = RepresentativeModel::new(&k, false).unwrap();
        let mut reps = RepSets::new(0.1, 0.1);
        let xs = [0.0, 0.9, 0.0, 0.0, 0.9];
        for (e, &x) in xs.iter().enumerate() {
            feed(&mut model, &mut reps, &k, &rec(e, 0, x, 0, 0.0, 0.5));
        }
        assert_eq!(model.weight(0), 3.0);
        assert_eq!(model.weight(1), 2.0);
    }

    #[test]
    fn sliding_window_is_rejected() {
        let k = kernel(TemporalKernel::SlidingWindow { window: 5 }, 0.1, 0.01);
        assert!(matches!(RepresentativeModel::new(&k, false), Err(Error::InvalidConfig(_))));
        assert!(RsKernsAgent::new("rs", params(k, 2, 0.1)).is_err());
    }

    #[test]
    fn batch_examples() {
        let k = kernel(TemporalKernel::Constant, 0.2, 0.01);
        let reps = RepSets::new(0.1, 0.1);
        assert_eq!(batch_recompute(&k, &M, &reps, &[], 0).unwrap(), ModelTables::default());

        let mut model = RepresentativeModel::new(&k, false).unwrap();
        let mut reps = RepSets::new(0.1, 0.1);
        let mut log = Vec::new();
        for (e, x) in [0.0, 0.3, 0.05, 0.3].into_iter().enumerate() {
            log.push(feed(&mut model, &mut reps, &k, &rec(e, 0, x, 0, x, 1.0)));
        }
        let batch = batch_recompute(&k, &M, &reps, &log, 0).unwrap();
        let phi = (-0.5f64 * (0.3f64 / 0.2).powi(2)).exp();
        // first representative absorbs records 0 and 2, second 1 and 3
        assert!((batch.w[0] - (2.0 + 2.0 * phi)).abs() < 1e-12);
        assert!(max_diff(&batch, &model.tables()) < 1e-12);
    }

    #[test]
    fn online_matches_batch_with_restart() {
        let k = kernel(TemporalKernel::Constant, 0.3, 0.01);
        let mut model = RepresentativeModel::new(&k, true).unwrap();
        let mut reps = RepSets::new(0.2, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stream = random_stream(&mut rng, 120);
        let mut log = Vec::new();
        for r in &stream[..60] {
            log.push(feed(&mut model, &mut reps, &k, r));
        }
        let before = model.tables().p;
        model.reset_rewards().unwrap();
        assert_eq!(model.tables().p, before);
        assert!(model.tables().r.iter().all(|&r| r == 0.0));
        for r in &stream[60..] {
            log.push(feed(&mut model, &mut reps, &k, r));
        }
        let batch = batch_recompute(&k, &M, &reps, &log, 60).unwrap();
        assert!(max_diff(&batch, &model.tables()) < 1e-9);
    }

    #[test]
    fn first_plan_is_clip_bound() {
        let k = kernel(TemporalKernel::ExpDiscount { eta: 0.9 }, 0.1, 0.01);
        let mut agent = RsKernsAgent::new("rs", params(k, 3, 0.1)).unwrap();
        agent.plan(0);
        for h in 0..3 {
            assert_eq!(agent.q_interpolate(h, (&Point::xy(0.2, 0.1), 1)), (3 - h) as f64);
        }
        assert_eq!(agent.act(0, &Point::xy(0.0, 0.0)), 0);
    }

    #[test]
    fn single_step_backup() {
        let k = kernel(TemporalKernel::Constant, 0.1, 1e-300);
        let mut p = params(k, 1, 0.1);
        p.bonus = BonusConfig::Experiment { c: 0.2 };
        let mut agent = RsKernsAgent::new("rs", p).unwrap();
        agent.plan(0);
        agent.observe(rec(0, 0, 0.0, 0, 0.0, 0.3)).unwrap();
        agent.plan(1);
        assert!((agent.q_values(0)[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ucbvi_matches_near_unit_discount() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let stream = random_stream(&mut rng, 100);
        let base = kernel(TemporalKernel::Constant, 0.2, 0.01);
        let mut ucb = make_rs_kernel_ucbvi("ucb", params(base, 1, 0.1)).unwrap();
        let near = kernel(TemporalKernel::ExpDiscount { eta: 1.0 - 1e-12 }, 0.2, 0.01);
        let mut rs = RsKernsAgent::new("rs", params(near, 1, 0.1)).unwrap();
        for r in &stream {
            ucb.observe(r.clone()).unwrap();
            rs.observe(r.clone()).unwrap();
        }
        let (a, b) = (ucb.step_state(0).model.tables(), rs.step_state(0).model.tables());
        assert!(max_diff(&a, &b) <= 1e-6);
    }

    #[test]
    fn stationary_estimate_lags_change() {
        let k = kernel(TemporalKernel::ExpDiscount { eta: 0.9 }, 0.1, 0.01);
        let mut ucb = make_rs_kernel_ucbvi("ucb", params(k, 1, 0.1)).unwrap();
        let mut rs = RsKernsAgent::new("rs", params(k, 1, 0.1)).unwrap();
        for e in 0..100 {
            let reward = if e < 50 { 0.0 } else { 1.0 };
            ucb.observe(rec(e, 0, 0.0, 0, 0.0, reward)).unwrap();
            rs.observe(rec(e, 0, 0.0, 0, 0.0, reward)).unwrap();
        }
        let blended = ucb.step_state(0).model.reward(0);
        assert!((blended - 50.0 / 100.01).abs() < 1e-12);
        assert!(rs.step_state(0).model.reward(0) > 0.99);
    }

    #[test]
    fn restart_contract() {
        let k = kernel(TemporalKernel::Constant, 0.1, 0.01);
        let mut plain = RsKernsAgent::new("rs", params(k, 1, 0.1)).unwrap();
        assert!(plain.notify_change(3).is_err());

        let mut agent = make_restart_baseline("restart", params(k, 1, 0.1)).unwrap();
        assert!(agent.supports_restart());
        for e in 0..10 {
            agent.observe(rec(e, 0, 0.1 * e as f64, 0, 0.0, 0.8)).unwrap();
        }
        let before = agent.step_state(0).model.tables().p;
        agent.notify_change(10).unwrap();
        let st = agent.step_state(0);
        assert_eq!(st.model.tables().p, before);
        assert!(st.model.tables().r.iter().all(|&r| r == 0.0));
        let empty_bonus = agent.bonus.bonus(0.01, 10);
        agent.plan(10);
        for &q in agent.q_values(0) {
            assert_eq!(q, empty_bonus);
        }
    }

    #[test]
    fn write_counts_settle_without_insertions() {
        let k = kernel(TemporalKernel::ExpDiscount { eta: 0.9 }, 0.1, 0.01);
        let mut agent = RsKernsAgent::new("rs", params(k, 1, 0.5)).unwrap();
        let xs = [0.0, 0.9, 0.0, 0.1, 0.9, 0.2, 0.8];
        let mut counts = Vec::new();
        for (e, &x) in xs.iter().enumerate() {
            agent.observe(rec(e, 0, x, 0, x, 0.5)).unwrap();
            counts.push((agent.take_write_count(), agent.take_insertions()));
        }
        // two pairs and two next states after episode 1
        assert!(counts[2..].iter().all(|&(w, ins)| w == counts[2].0 && ins == 0));
        let (pairs, next) = (2u64, 2u64);
        assert_eq!(counts[2].0, (pairs + 1) * (next + 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn online_equals_batch(
            seed in any::<u64>(),
            eps_idx in 0usize..3,
            eta_idx in 0usize..3,
        ) {
            let eps = [0.0, 0.05, 0.2][eps_idx];
            let temporal = match eta_idx {
                0 => TemporalKernel::ExpDiscount { eta: 0.3 },
                1 => TemporalKernel::ExpDiscount { eta: 0.9 },
                _ => TemporalKernel::Constant,
            };
            let k = KernelSpec { temporal, spatial: SpatialKernel::ExpP4 { sigma: 0.3 }, beta: 0.01 };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = RepresentativeModel::new(&k, false).unwrap();
            let mut reps = RepSets::new(eps, eps);
            let mut log = Vec::new();
            for r in random_stream(&mut rng, 80) {
                log.push(feed(&mut model, &mut reps, &k, &r));
            }
            let batch = batch_recompute(&k, &M, &reps, &log, 0).unwrap();
            prop_assert!(max_diff(&batch, &model.tables()) <= 1e-9);
        }

        #[test]
        fn separation_and_subprobability(seed in any::<u64>(), eps in 0.01f64..0.5) {
            let k = kernel(TemporalKernel::ExpDiscount { eta: 0.8 }, 0.2, 0.01);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model = RepresentativeModel::new(&k, false).unwrap();
            let mut reps = RepSets::new(eps, eps);
            for r in random_stream(&mut rng, 60) {
                feed(&mut model, &mut reps, &k, &r);
            }
            let pairs = reps.pairs();
            for i in 0..pairs.len() {
                for j in 0..i {
                    prop_assert!(M.pair_distance((&pairs[i].0, pairs[i].1), (&pairs[j].0, pairs[j].1)) > eps);
                }
                let w = model.weight(i);
                let mass: f64 = model.transition(i).iter().sum();
                prop_assert!(mass <= w / (0.01 + w) + 1e-9);
            }
            let ys = reps.next_states();
            for i in 0..ys.len() {
                for j in 0..i {
                    prop_assert!(M.fast_state_distance(&ys[i], &ys[j]) > eps);
                }
            }
        }
    }
}
