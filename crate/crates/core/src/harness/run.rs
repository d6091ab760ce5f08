//! The experiment loop and its CSV log.
//!
//! One row per episode and run:
//! `run_id,agent,seed,episode,episodic_return,cumulative_return,optimal_value,cumulative_regret`.
//! Episodes are 0-based. `optimal_value` is the oracle's `V*_1(x_1^k)` and
//! `cumulative_regret` sums `V*_1(x_1^j) - return_j` over `j <= k`; it uses
//! realized returns rather than policy values, so it is a noisy proxy of the
//! dynamic regret. Both columns are empty when the oracle is disabled.

use std::io::Write;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AgentSpec, BuiltAgent, ExperimentConfig};
use crate::agent::TransitionRecord;
use crate::error::{Error, Result};
use crate::oracle::{GridSpec, OptimalValueOracle};

pub const CSV_HEADER: [&str; 8] = [
    "run_id",
    "agent",
    "seed",
    "episode",
    "episodic_return",
    "cumulative_return",
    "optimal_value",
    "cumulative_regret",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLogRow {
    pub run_id: String,
    pub agent: String,
    pub seed: u64,
    pub episode: usize,
    pub episodic_return: f64,
    pub cumulative_return: f64,
    pub optimal_value: Option<f64>,
    pub cumulative_regret: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub agent: String,
    pub seed: u64,
    pub rows: Vec<RunLogRow>,
    /// Model-table cell writes per episode (0 for the full-history agent).
    pub writes: Vec<u64>,
    /// Representatives inserted per episode.
    pub insertions: Vec<usize>,
}

/// Independent stream seed for `label` under the master `seed`.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    // FNV-1a of the label selects the ChaCha stream
    let stream = label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

pub fn run_id(agent: &str, seed: u64) -> String {
    format!("{agent}-s{seed}")
}

/// Runs one agent on one seed. `on_record` sees every transition in stream
/// order. The trained agent is returned for inspection.
pub fn run_single(
    cfg: &ExperimentConfig,
    spec: &AgentSpec,
    seed: u64,
    on_record: &mut dyn FnMut(&TransitionRecord),
) -> Result<(RunOutcome, BuiltAgent)> {
    let mut env = cfg.build_env(derive_seed(seed, "env"))?;
    let mut built = cfg.build_agent(spec, env.as_ref())?;
    let mut oracle = if cfg.regret_oracle {
        let grid = GridSpec { resolution: cfg.oracle_grid, ..GridSpec::default() };
        Some(OptimalValueOracle::new(env.as_ref(), grid)?)
    } else {
        None
    };
    let changes = if built.as_agent().supports_restart() {
        env.change_episodes(cfg.episodes)
    } else {
        Vec::new()
    };
    let mut next_change = changes.iter().peekable();
    let id = run_id(&spec.name, seed);
    let mut rows = Vec::with_capacity(cfg.episodes);
    let mut writes = Vec::with_capacity(cfg.episodes);
    let mut insertions = Vec::with_capacity(cfg.episodes);
    let (mut cum_return, mut cum_regret) = (0.0, 0.0);

    for k in 0..cfg.episodes {
        if next_change.next_if(|&&c| c == k).is_some() {
            built.as_agent_mut().notify_change(k)?;
        }
        let agent = built.as_agent_mut();
        agent.plan(k);
        let start = env.reset(k);
        let mut state = start.clone();
        let mut ret = 0.0;
        for h in 0..cfg.horizon {
            let action = agent.act(h, &state);
            let (reward, next) = env.step(k, h, &state, action);
            let record = TransitionRecord {
                episode: k,
                step: h,
                state: std::mem::replace(&mut state, next.clone()),
                action,
                next_state: next,
                reward,
            };
            on_record(&record);
            agent.observe(record)?;
            ret += reward;
        }
        writes.push(agent.take_write_count());
        insertions.push(match &mut built {
            BuiltAgent::Rs(a) => a.take_insertions(),
            BuiltAgent::Kerns(_) => 0,
        });
        cum_return += ret;
        let optimal = match oracle.as_mut() {
            Some(o) => Some(o.value(env.as_ref(), k, &start)?),
            None => None,
        };
        let regret = optimal.map(|v| {
            cum_regret += v - ret;
            cum_regret
        });
        rows.push(RunLogRow {
            run_id: id.clone(),
            agent: spec.name.clone(),
            seed,
            episode: k,
            episodic_return: ret,
            cumulative_return: cum_return,
            optimal_value: optimal,
            cumulative_regret: regret,
        });
    }
    let outcome = RunOutcome { run_id: id, agent: spec.name.clone(), seed, rows, writes, insertions };
    Ok((outcome, built))
}

/// Thread cap from `KERNRL_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("KERNRL_THREADS").ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

/// Runs every (agent, seed) pair, in parallel across runs, and returns the
/// outcomes in (agent, seed) config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let jobs: Vec<(&AgentSpec, u64)> =
        cfg.agents.iter().flat_map(|a| cfg.seeds.iter().map(move |&s| (a, s))).collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, seed)| run_single(cfg, spec, seed, &mut |_| {}).map(|(o, _)| o))
            .collect()
    })
}

/// Fills `optimal_value` and `cumulative_regret` from per-episode oracle values.
pub fn compute_regret_column(rows: &mut [RunLogRow], optimal: &[f64]) -> Result<()> {
    if rows.len() != optimal.len() {
        return Err(Error::InvalidInput(format!(
            "{} rows but {} oracle values",
            rows.len(),
            optimal.len()
        )));
    }
    let mut cum = 0.0;
    for (row, &v) in rows.iter_mut().zip(optimal) {
        cum += v - row.episodic_return;
        row.optimal_value = Some(v);
        row.cumulative_regret = Some(cum);
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn write_csv<W: Write>(out: W, outcomes: &[RunOutcome]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in outcomes.iter().flat_map(|o| &o.rows) {
        w.write_record([
            row.run_id.clone(),
            row.agent.clone(),
            row.seed.to_string(),
            row.episode.to_string(),
            format!("{:.6}", row.episodic_return),
            format!("{:.6}", row.cumulative_return),
            fmt_opt(row.optimal_value),
            fmt_opt(row.cumulative_regret),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(std::io::BufWriter::new(file), outcomes)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::AgentKind;

    fn row(ret: f64) -> RunLogRow {
        RunLogRow {
            run_id: "a-s0".into(),
            agent: "a".into(),
            seed: 0,
            episode: 0,
            episodic_return: ret,
            cumulative_return: ret,
            optimal_value: None,
            cumulative_regret: None,
        }
    }

    fn small_config(episodes: usize) -> ExperimentConfig {
        ExperimentConfig {
            episodes,
            horizon: 4,
            agents: vec![AgentSpec::new("rs", AgentKind::RsKerns)],
            seeds: vec![0],
            oracle_grid: 11,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn regret_examples() {
        let mut rows = vec![row(0.4), row(0.6)];
        compute_regret_column(&mut rows, &[1.0, 1.0]).unwrap();
        assert!((rows[0].cumulative_regret.unwrap() - 0.6).abs() < 1e-12);
        assert!((rows[1].cumulative_regret.unwrap() - 1.0).abs() < 1e-12);

        let mut rows = vec![row(0.4), row(0.6)];
        compute_regret_column(&mut rows, &[0.4, 0.6]).unwrap();
        assert!(rows.iter().all(|r| r.cumulative_regret == Some(0.0)));

        let mut rows = vec![row(0.25)];
        compute_regret_column(&mut rows, &[0.75]).unwrap();
        assert_eq!(rows[0].cumulative_regret, Some(0.5));
        assert!(matches!(compute_regret_column(&mut rows, &[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn single_episode_run() {
        let (out, _) = run_single(&small_config(1), &AgentSpec::new("rs", AgentKind::RsKerns), 0, &mut |_| {}).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].cumulative_return, out.rows[0].episodic_return);
        assert!(out.rows[0].optimal_value.is_some());
    }

    #[test]
    fn seeds_are_labelled_streams() {
        assert_eq!(derive_seed(3, "env"), derive_seed(3, "env"));
        assert_ne!(derive_seed(3, "env"), derive_seed(3, "agent"));
        assert_ne!(derive_seed(3, "env"), derive_seed(4, "env"));
    }

    #[test]
    fn csv_layout() {
        let mut cfg = small_config(3);
        cfg.regret_oracle = false;
        cfg.seeds = vec![0, 1];
        let outcomes = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &outcomes).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER.join(","));
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("rs-s0,rs,0,0,") && lines[1].ends_with(",,"));
        assert!(lines[4].starts_with("rs-s1,rs,1,0,"));
    }
}
