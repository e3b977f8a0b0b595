mod cmd;
mod config;
mod error;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "ecm", version, about = "Evolutionarily conserved modules from phylogenetic profiles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate gain nodes and the background loss model.
    Preprocess(cmd::preprocess::PreprocessArgs),
    /// Cluster a gene set into modules and report the MAP partition.
    Partition(cmd::partition::PartitionArgs),
    /// Rank candidate genes against every module by log-likelihood ratio.
    Expand(cmd::expand::ExpandArgs),
    /// Write one synthetic dataset with its true modules.
    Simulate(cmd::simulate::SimulateArgs),
    /// Score clustering methods over a grid of synthetic datasets.
    Benchmark(cmd::benchmark::BenchmarkArgs),
}

/// Options every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key=value file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

pub struct Context {
    pub threads: usize,
    pub started: Instant,
}

fn common(c: &Command) -> &Common {
    match c {
        Command::Preprocess(a) => &a.common,
        Command::Partition(a) => &a.common,
        Command::Expand(a) => &a.common,
        Command::Simulate(a) => &a.common,
        Command::Benchmark(a) => &a.common,
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let threads = match common(&cli.command).threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => n,
        None => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let ctx = Context { threads, started };
    match cli.command {
        Command::Preprocess(a) => cmd::preprocess::run(a, &ctx),
        Command::Partition(a) => cmd::partition::run(a, &ctx),
        Command::Expand(a) => cmd::expand::run(a, &ctx),
        Command::Simulate(a) => cmd::simulate::run(a, &ctx),
        Command::Benchmark(a) => cmd::benchmark::run(a, &ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
