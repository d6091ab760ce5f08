//! Experiment configuration, parameter tuning and the run loop.

mod config;
mod run;
mod tune;

pub use config::{AgentKind, AgentSpec, BuiltAgent, EnvSpec, ExperimentConfig, RsSpec, TabularSpec};
pub use run::{
    compute_regret_column, derive_seed, run_experiment, run_id, run_single, thread_cap, write_csv,
    write_csv_file, RunLogRow, RunOutcome, CSV_HEADER,
};
pub use tune::{tune_parameters, window_for, BoundFamily, TunedParams};
