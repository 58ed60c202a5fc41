use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use corerl_cli::commands::{
    cmd_bench, cmd_stats, cmd_sweep, cmd_train, parse_seeds, BenchArgs, ExecOptions, StatsArgs,
    Suite, SweepArgs, TrainArgs,
};
use corerl_cli::config::RunConfig;
use corerl_cli::rundir::{run_seed, seed_dir};
use corerl_cli::CliError;
use corerl_core::analytics::metrics::DEFAULT_GENERATIONS;
use corerl_core::benchmark::BenchmarkFn;

#[derive(Parser)]
#[command(
    name = "corerl",
    version,
    about = "PPO for constrained combinatorial design"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one run per seed and write a run directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Single seed; defaults to the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_seconds: Option<f64>,
    },
    /// Run a parameter grid over seeds. Completed cells are skipped on rerun.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Hyper-parameter name, or `env.<field>` for an environment setting.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// A count N (seeds 0..N) or a comma-separated list.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Reproduce a benchmark-function hyper-parameter study.
    Bench {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "20")]
        seeds: String,
        #[arg(long)]
        samples: Option<u64>,
        /// Subset of functions, comma-separated.
        #[arg(long, value_delimiter = ',')]
        functions: Vec<String>,
        /// Print the run matrix without training.
        #[arg(long)]
        dry_run: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Metrics and rank tests over existing run directories.
    Stats {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_GENERATIONS)]
        generations: usize,
    },
    /// One seed of a prepared config (used by parallel sweeps).
    #[command(hide = true)]
    Cell {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exec(jobs: usize) -> ExecOptions {
    ExecOptions {
        jobs,
        exe: std::env::current_exe().ok(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Train {
            config,
            seed,
            out,
            max_seconds,
        } => cmd_train(&TrainArgs {
            config,
            seed,
            out,
            max_seconds,
        }),
        Cmd::Sweep {
            config,
            param,
            values,
            seeds,
            out,
            jobs,
        } => cmd_sweep(&SweepArgs {
            config,
            param,
            values,
            seeds: seeds.as_deref().map(parse_seeds).transpose()?,
            out,
            exec: exec(jobs),
        }),
        Cmd::Bench {
            suite,
            out,
            seeds,
            samples,
            functions,
            dry_run,
            jobs,
        } => {
            let mut args = BenchArgs::new(suite, out);
            args.seeds = parse_seeds(&seeds)?;
            args.samples = samples;
            args.dry_run = dry_run;
            args.exec = exec(jobs);
            if !functions.is_empty() {
                args.functions = functions
                    .iter()
                    .map(|f| f.parse::<BenchmarkFn>())
                    .collect::<Result<_, _>>()?;
            }
            cmd_bench(&args)
        }
        Cmd::Stats {
            runs,
            out,
            generations,
        } => cmd_stats(&StatsArgs {
            runs,
            out,
            generations,
        })
        .map(|_| ()),
        Cmd::Cell { config, seed, out } => {
            let config = RunConfig::load(&config)?;
            config.validate()?;
            run_seed(&config, seed, &seed_dir(&out, seed))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
