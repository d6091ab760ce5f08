use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kernrl::harness::{self, BoundFamily, ExperimentConfig};
use kernrl::kernels::{check_assumptions, default_z_grid};
use kernrl::Error;

#[derive(Parser)]
#[command(name = "kernrl", version, about = "Kernel-based RL for non-stationary episodic MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write the per-episode CSV log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for the CSV (keeps the file name from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<String>>,
    },
    /// Kernel bandwidth, discount and window from the optimized bounds.
    Tune {
        #[arg(long = "K")]
        episodes: usize,
        #[arg(long)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        d1: u32,
        #[arg(long, default_value_t = 0)]
        d2: u32,
        #[arg(long, default_value = "r1")]
        bound: BoundFamily,
        /// Horizon entering the R2 discount.
        #[arg(long, default_value_t = 15)]
        horizon: usize,
    },
    /// Check the kernel conditions for every agent in a config.
    CheckKernel {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::InvalidInput(_) | Error::Json { .. } => 2,
        Error::KernelCheck(_) => 3,
        _ => 1,
    }
}

fn run(cli: Cli) -> kernrl::Result<()> {
    match cli.command {
        Command::Run { config, out, seeds, episodes, agents } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
            }
            if let Some(k) = episodes {
                cfg.episodes = k;
            }
            if let Some(names) = agents {
                if let Some(missing) = names.iter().find(|n| !cfg.agents.iter().any(|a| &a.name == *n)) {
                    return Err(Error::InvalidConfig(format!("no agent named {missing:?} in config")));
                }
                cfg.agents.retain(|a| names.contains(&a.name));
            }
            if let Some(dir) = out {
                let file = cfg.output.file_name().map_or_else(|| "runs.csv".into(), |f| f.to_owned());
                cfg.output = dir.join(file);
            }
            let outcomes = harness::run_experiment(&cfg)?;
            harness::write_csv_file(&cfg.output, &outcomes)?;
            for o in &outcomes {
                if let Some(last) = o.rows.last() {
                    println!("{}: cumulative return {:.3}", o.run_id, last.cumulative_return);
                }
            }
            println!("wrote {}", cfg.output.display());
            Ok(())
        }
        Command::Tune { episodes, delta, d1, d2, bound, horizon } => {
            let t = harness::tune_parameters(episodes, delta, d1 as f64, d2 as f64, bound, horizon)?;
            println!("{}", serde_json::to_string_pretty(&t).expect("serializable"));
            Ok(())
        }
        Command::CheckKernel { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let grid = default_z_grid();
            let mut failed = Vec::new();
            for spec in &cfg.agents {
                let kernel = cfg.agent_kernel(spec)?;
                match check_assumptions(&kernel, &grid, None)? {
                    Ok(c) => println!(
                        "{}: ok C1={:.6} C2={:.6} C3={:.6} G(4)={:.6e} (eta={}, W={})",
                        spec.name, c.c1, c.c2, c.c3, c.g4, c.eta, c.window
                    ),
                    Err(f) => {
                        println!("{}: FAILED {f}", spec.name);
                        failed.push(spec.name.clone());
                    }
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Error::KernelCheck(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), 2);
        assert_eq!(exit_code(&Error::KernelCheck("x".into())), 3);
        assert_eq!(exit_code(&Error::Unsupported("x".into())), 1);
    }
}
