use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use lts_cli::{cmd_gen_synth, cmd_run, cmd_sweep, ExperimentConfig};

#[derive(Parser)]
#[command(name = "lts", about = "Active-learning benchmark harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV from the config's cluster spec.
    GenSynth(CommonArgs),
    /// Run the configured strategies at a single label budget.
    Run(CommonArgs),
    /// Run the configured strategies over a budget ladder.
    Sweep(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the flat-JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output override: report directory for run/sweep, CSV path for
    /// gen-synth.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override: replaces the config's seed list (run/sweep) and its
    /// generation seed (gen-synth).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweep-level parallelism; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(args: &CommonArgs) -> Result<ExperimentConfig> {
    if let Some(threads) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let mut config = ExperimentConfig::from_path(&args.config)?;
    config.apply_overrides(args.out.clone(), args.seed);
    Ok(config)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenSynth(args) => {
            let config = load(&args)?;
            let out = args
                .out
                .clone()
                .context("gen-synth needs --out with the CSV path to write")?;
            cmd_gen_synth(&config, &out)
        }
        Command::Run(args) => cmd_run(&load(&args)?),
        Command::Sweep(args) => cmd_sweep(&load(&args)?),
    }
}
