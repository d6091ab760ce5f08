//! JSON experiment configuration. Every field has a default matching the
//! BallWorld experiment: `sigma = 0.05`, `eps = eps_X = 0.1`, `beta = 0.01`,
//! `H = 15`, experiment bonus with `c = 0.1`, `eta = exp(-(1/N)^(2/3))`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::Agent;
use crate::bonus::BonusConfig;
use crate::env::{BallWorldEnv, BallWorldParams, NonStationaryEnv, TabularBlock, TabularNSEnv};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, SpatialKernel, TemporalKernel};
use crate::kerns::{default_lipschitz, KernsAgent, KernsParams};
use crate::metric::MetricSpec;
use crate::rs_kerns::{make_restart_baseline, make_rs_kernel_ucbvi, Interpolation, RsKernsAgent, RsParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub episodes: usize,
    pub horizon: usize,
    pub env: EnvSpec,
    pub agents: Vec<AgentSpec>,
    pub seeds: Vec<u64>,
    pub regret_oracle: bool,
    /// Per-axis resolution of the BallWorld planning grid.
    pub oracle_grid: usize,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            episodes: 6000,
            horizon: 15,
            env: EnvSpec::BallWorld(BallWorldParams::default()),
            agents: vec![
                AgentSpec::new("RS-KeRNS", AgentKind::RsKerns),
                AgentSpec::new("RS-Kernel-UCBVI", AgentKind::RsKernelUcbvi),
                AgentSpec::new("RestartBaseline", AgentKind::RestartBaseline),
            ],
            seeds: vec![0, 1, 2, 3],
            regret_oracle: true,
            oracle_grid: 41,
            output: PathBuf::from("runs.csv"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EnvSpec {
    BallWorld(BallWorldParams),
    Tabular(TabularSpec),
}

/// Finite MDP given by per-block tables, switched either at explicit
/// `starts` or cyclically every `period` episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabularSpec {
    pub num_states: usize,
    pub num_actions: usize,
    #[serde(default)]
    pub initial_state: usize,
    pub blocks: Vec<TabularBlock>,
    #[serde(default)]
    pub starts: Option<Vec<usize>>,
    #[serde(default)]
    pub period: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Kerns,
    RsKerns,
    RsKernelUcbvi,
    RestartBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsSpec {
    pub epsilon: f64,
    pub epsilon_x: f64,
    pub interpolation: Interpolation,
}

impl Default for RsSpec {
    fn default() -> Self {
        RsSpec { epsilon: 0.1, epsilon_x: 0.1, interpolation: Interpolation::NearestNeighbor }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub name: String,
    pub kind: AgentKind,
    /// Defaults to `exp_discount` with `eta = exp(-(1/N)^(2/3))`; ignored by
    /// the stationary and restart baselines.
    #[serde(default)]
    pub temporal: Option<TemporalKernel>,
    #[serde(default = "default_spatial")]
    pub spatial: SpatialKernel,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Defaults to `sum_h L_r L_p^(H-h)` with the environment's constants.
    #[serde(default)]
    pub lip_q: Option<f64>,
    #[serde(default)]
    pub bonus: BonusConfig,
    #[serde(default)]
    pub rs: RsSpec,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
}

fn default_spatial() -> SpatialKernel {
    SpatialKernel::ExpP4 { sigma: 0.05 }
}

fn default_beta() -> f64 {
    0.01
}

impl AgentSpec {
    pub fn new(name: impl Into<String>, kind: AgentKind) -> Self {
        AgentSpec {
            name: name.into(),
            kind,
            temporal: None,
            spatial: default_spatial(),
            beta: default_beta(),
            lip_q: None,
            bonus: BonusConfig::default(),
            rs: RsSpec::default(),
            metric: None,
        }
    }
}

/// An agent as built by the harness, keeping the concrete type reachable for
/// diagnostics.
pub enum BuiltAgent {
    Kerns(KernsAgent),
    Rs(RsKernsAgent),
}

impl BuiltAgent {
    pub fn as_agent_mut(&mut self) -> &mut dyn Agent {
        match self {
            BuiltAgent::Kerns(a) => a,
            BuiltAgent::Rs(a) => a,
        }
    }

    pub fn as_agent(&self) -> &dyn Agent {
        match self {
            BuiltAgent::Kerns(a) => a,
            BuiltAgent::Rs(a) => a,
        }
    }

    pub fn as_rs(&self) -> Option<&RsKernsAgent> {
        match self {
            BuiltAgent::Rs(a) => Some(a),
            BuiltAgent::Kerns(_) => None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 || self.horizon == 0 {
            return Err(Error::InvalidConfig("episodes and horizon must be >= 1".into()));
        }
        if self.agents.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("need at least one agent and one seed".into()));
        }
        if self.oracle_grid < 2 {
            return Err(Error::InvalidConfig("oracle_grid must be >= 2".into()));
        }
        let mut names: Vec<&str> = self.agents.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("agent names must be unique".into()));
        }
        let env = self.build_env(0)?;
        for spec in &self.agents {
            self.agent_kernel(spec)?.validate()?;
            self.build_agent(spec, env.as_ref())?;
        }
        Ok(())
    }

    pub fn build_env(&self, seed: u64) -> Result<Box<dyn NonStationaryEnv>> {
        match &self.env {
            EnvSpec::BallWorld(p) => {
                let params = BallWorldParams { horizon: self.horizon, ..p.clone() };
                Ok(Box::new(BallWorldEnv::new(params, seed)?))
            }
            EnvSpec::Tabular(t) => {
                let env = match (&t.starts, t.period) {
                    (Some(starts), None) => TabularNSEnv::new(
                        t.num_states,
                        t.num_actions,
                        t.initial_state,
                        t.blocks.clone(),
                        starts.clone(),
                        seed,
                    )?,
                    (None, Some(period)) => TabularNSEnv::periodic(
                        t.num_states,
                        t.num_actions,
                        t.initial_state,
                        t.blocks.clone(),
                        period,
                        self.episodes,
                        seed,
                    )?,
                    (None, None) if t.blocks.len() == 1 => TabularNSEnv::new(
                        t.num_states,
                        t.num_actions,
                        t.initial_state,
                        t.blocks.clone(),
                        vec![0],
                        seed,
                    )?,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "tabular env needs exactly one of `starts` or `period`".into(),
                        ))
                    }
                };
                if env.horizon() != self.horizon {
                    return Err(Error::InvalidConfig(format!(
                        "tabular tables have horizon {}, config says {}",
                        env.horizon(),
                        self.horizon
                    )));
                }
                Ok(Box::new(env))
            }
        }
    }

    /// Episodes between changes used by the default discount.
    fn change_scale(&self) -> usize {
        match &self.env {
            EnvSpec::BallWorld(p) => p.period,
            EnvSpec::Tabular(t) => t.period.unwrap_or(self.episodes),
        }
    }

    pub fn agent_kernel(&self, spec: &AgentSpec) -> Result<KernelSpec> {
        let temporal = match spec.kind {
            AgentKind::RsKernelUcbvi | AgentKind::RestartBaseline => TemporalKernel::Constant,
            AgentKind::Kerns | AgentKind::RsKerns => spec.temporal.unwrap_or_else(|| {
                let n = self.change_scale().max(1) as f64;
                TemporalKernel::ExpDiscount { eta: (-(1.0 / n).powf(2.0 / 3.0)).exp() }
            }),
        };
        let spatial = match (&self.env, spec.spatial) {
            // finite MDPs default to exact matching
            (EnvSpec::Tabular(_), s) if s == default_spatial() => SpatialKernel::ExactMatch,
            (_, s) => s,
        };
        Ok(KernelSpec { temporal, spatial, beta: spec.beta })
    }

    pub fn build_agent(&self, spec: &AgentSpec, env: &dyn NonStationaryEnv) -> Result<BuiltAgent> {
        let kernel = self.agent_kernel(spec)?;
        let (lip_r, lip_p) = match self.env {
            EnvSpec::BallWorld(_) => (2.0, 1.0),
            EnvSpec::Tabular(_) => (1.0, 1.0),
        };
        let lip_q = spec.lip_q.unwrap_or_else(|| default_lipschitz(self.horizon, lip_r, lip_p));
        let metric = spec.metric.unwrap_or_else(|| env.metric());
        if spec.kind == AgentKind::Kerns {
            let params = KernsParams {
                horizon: self.horizon,
                num_actions: env.num_actions(),
                lip_q,
                kernel,
                bonus: spec.bonus,
                metric,
            };
            return Ok(BuiltAgent::Kerns(KernsAgent::new(spec.name.clone(), params)?));
        }
        let params = RsParams {
            horizon: self.horizon,
            num_actions: env.num_actions(),
            lip_q,
            kernel,
            bonus: spec.bonus,
            metric,
            epsilon: spec.rs.epsilon,
            epsilon_x: spec.rs.epsilon_x,
            interpolation: spec.rs.interpolation,
            restart: false,
        };
        let agent = match spec.kind {
            AgentKind::RsKerns => RsKernsAgent::new(spec.name.clone(), params)?,
            AgentKind::RsKernelUcbvi => make_rs_kernel_ucbvi(spec.name.clone(), params)?,
            AgentKind::RestartBaseline => make_restart_baseline(spec.name.clone(), params)?,
            AgentKind::Kerns => unreachable!(),
        };
        Ok(BuiltAgent::Rs(agent))
    }
}
