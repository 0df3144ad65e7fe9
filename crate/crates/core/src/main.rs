use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use modi::agent::Agent;
use modi::harness::{self, Checkpoint, RunConfig};
use modi::replay::WeightVector;
use modi::serve::{self, ServeState};
use modi::{oracle, Error};

/// Weight-conditioned multi-objective RL on double-integrator environments.
#[derive(Parser)]
#[command(name = "modi", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and write a checkpoint plus a training log CSV.
    Train {
        /// Flat key-value run configuration file (defaults used when absent).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (overrides the config's out_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Augmentation-rate override.
        #[arg(long)]
        k: Option<usize>,
        /// Episode-count override.
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Sweep w1 over [0,1] on a 1-D checkpoint and compare with the oracle.
    EvalSweep {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid resolution (points across [0,1]).
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Sweep one axis's weight pair on a 2-D checkpoint.
    EvalSweep2d {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Which axis trades time against fuel (1 or 2).
        #[arg(long, default_value_t = 1)]
        axis: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Train one agent per (k, seed) and summarize mean cost by k.
    KSweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated augmentation rates.
        #[arg(long, default_value = "0,1,2,4,8", value_delimiter = ',')]
        k_values: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        seeds_per_k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One greedy rollout as CSV with the oracle trajectory alongside.
    Rollout {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated weight vector, e.g. "1,0".
        #[arg(long, default_value = "1,0", value_delimiter = ',')]
        w: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form oracle curves as CSV.
    Oracle {
        /// Goal distance.
        #[arg(long, default_value_t = 90.0)]
        d: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a checkpoint over HTTP for the steering console.
    Serve {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

fn load_config(path: Option<&Path>) -> modi::Result<RunConfig> {
    match path {
        Some(p) => harness::load_run_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn write_out(dir: &Path, name: &str, contents: &str) -> modi::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn run(cli: Cli) -> modi::Result<()> {
    match cli.command {
        Command::Train { config, out, seed, k, episodes } => {
            let mut run_config = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                run_config.set_seed(seed);
            }
            if let Some(k) = k {
                run_config.agent.k = k;
            }
            if let Some(episodes) = episodes {
                run_config.agent.episodes = episodes;
            }
            if let Some(out) = out {
                run_config.out_dir = out;
            }
            run_config.validate()?;
            let mut agent = Agent::new(&run_config.env, run_config.agent.clone())?;
            eprintln!(
                "training: dims={} episodes={} k={} seed={}",
                run_config.env.dims,
                run_config.agent.episodes,
                run_config.agent.k,
                run_config.seed
            );
            let log = agent.train(&run_config.env)?;
            let ckpt = Checkpoint::from_agent(&agent, &run_config, run_config.agent.episodes);
            let dir = run_config.out_dir.clone();
            let ckpt_path = dir.join("checkpoint.json");
            std::fs::create_dir_all(&dir)?;
            harness::save_checkpoint(&ckpt_path, &ckpt)?;
            let log_path = write_out(&dir, "train_log.csv", &harness::train_log_csv(&log))?;
            println!("checkpoint: {}", ckpt_path.display());
            println!("train log:  {}", log_path.display());
            Ok(())
        }
        Command::EvalSweep { checkpoint, out, grid } => {
            let ckpt = harness::load_checkpoint(&checkpoint)?;
            let run_config = ckpt.run_config.clone();
            let resolution = grid.unwrap_or(run_config.eval_grid);
            let agent = ckpt.into_agent()?;
            let rows = harness::eval_sweep(
                &agent,
                &run_config.env,
                &harness::w1_grid(resolution),
                run_config.eval_episodes,
            )?;
            let dir = out.unwrap_or_else(|| run_config.out_dir.clone());
            let path = write_out(&dir, "eval_sweep.csv", &harness::eval_sweep_csv(&rows))?;
            println!("eval sweep: {}", path.display());
            Ok(())
        }
        Command::EvalSweep2d { checkpoint, axis, out, grid } => {
            let ckpt = harness::load_checkpoint(&checkpoint)?;
            let run_config = ckpt.run_config.clone();
            let resolution = grid.unwrap_or(run_config.eval_grid);
            let agent = ckpt.into_agent()?;
            let rows = harness::eval_sweep_2d(
                &agent,
                &run_config.env,
                axis,
                &harness::w1_grid(resolution),
            )?;
            let dir = out.unwrap_or_else(|| run_config.out_dir.clone());
            let name = format!("eval_sweep_2d_axis{axis}.csv");
            let path = write_out(&dir, &name, &harness::eval_sweep_2d_csv(&rows))?;
            println!("eval sweep 2d: {}", path.display());
            Ok(())
        }
        Command::KSweep { config, k_values, seeds_per_k, out, seed } => {
            let mut run_config = load_config(config.as_deref())?;
            if let Some(seed) = seed {
                run_config.set_seed(seed);
            }
            if let Some(out) = out {
                run_config.out_dir = out;
            }
            eprintln!(
                "k-sweep: k in {:?}, {seeds_per_k} seed(s) per k, {} episodes each",
                k_values, run_config.agent.episodes
            );
            let (rows, details) = harness::k_sweep(&run_config, &k_values, seeds_per_k)?;
            let dir = run_config.out_dir.clone();
            let path = write_out(&dir, "k_sweep.csv", &harness::k_sweep_csv(&rows))?;
            let mut detail_csv = String::from("k,seed,mean_cost\n");
            for d in &details {
                detail_csv.push_str(&format!("{},{},{}\n", d.k, d.seed, d.mean_cost));
            }
            write_out(&dir, "k_sweep_runs.csv", &detail_csv)?;
            println!("k sweep: {}", path.display());
            Ok(())
        }
        Command::Rollout { checkpoint, w, out } => {
            let ckpt = harness::load_checkpoint(&checkpoint)?;
            let run_config = ckpt.run_config.clone();
            let agent = ckpt.into_agent()?;
            let weights = WeightVector::new(w)?;
            let csv = harness::rollout_csv(&agent, &run_config.env, &weights)?;
            let dir = out.unwrap_or_else(|| run_config.out_dir.clone());
            let path = write_out(&dir, "rollout.csv", &csv)?;
            println!("rollout: {}", path.display());
            Ok(())
        }
        Command::Oracle { d, grid, out } => {
            let profiles = oracle::oracle_curves(d, &harness::w1_grid(grid))?;
            let csv = harness::oracle_csv(&profiles);
            match out {
                Some(dir) => {
                    let path = write_out(&dir, "oracle.csv", &csv)?;
                    println!("oracle: {}", path.display());
                }
                None => print!("{csv}"),
            }
            Ok(())
        }
        Command::Serve { checkpoint, port } => {
            let ckpt = harness::load_checkpoint(&checkpoint)?;
            let state = ServeState::from_checkpoint(ckpt)?;
            serve::run(state, port)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                // Bad input files (missing, malformed, wrong version, invalid
                // config values) exit with 3; other failures with 1. Usage
                // errors exit with 2 via clap.
                Error::Io(_)
                | Error::Malformed(_)
                | Error::VersionMismatch { .. }
                | Error::Config(_) => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
