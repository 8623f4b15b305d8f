use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use envpes_bench::aggregate::aggregate_dir;
use envpes_bench::config::ExperimentFile;
use envpes_bench::runner::run_experiment;
use envpes_bench::sampler::run_sampler_validation;
use envpes_bench::{BenchError, Result};

#[derive(Parser)]
#[command(name = "envpes", version, about = "Cost-aware multi-fidelity Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and aggregate its traces.
    Run(RunArgs),
    /// Compare support samplers along optimization runs.
    ValidateSampler(RunArgs),
    /// Re-aggregate the traces in a result directory.
    Aggregate {
        #[arg(long)]
        out: PathBuf,
        /// Grid points per cost axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Base seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs; overrides the config.
    #[arg(long)]
    runs: Option<usize>,
    /// Concurrent runs.
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<(ExperimentFile, usize)> {
        let mut file = ExperimentFile::load(&self.config)?;
        if let Some(seed) = self.seed {
            file.experiment.seed = seed;
        }
        if let Some(runs) = self.runs {
            file.experiment.runs = runs;
        }
        if let Some(jobs) = self.jobs {
            file.experiment.jobs = Some(jobs);
        }
        file.validate()?;
        let jobs = file.experiment.jobs.unwrap_or(1);
        Ok((file, jobs))
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let (file, jobs) = args.load()?;
            let summary = run_experiment(&file, &args.out, jobs)?;
            println!("wrote {} traces and {}", summary.runs.len(), summary.aggregate.display());
            let failed: Vec<String> = summary.failed().map(|r| format!("run {}: {}", r.run_index, r.error.as_deref().unwrap_or(""))).collect();
            if !failed.is_empty() {
                return Err(BenchError::Config(format!("{} run(s) aborted with partial traces; {}", failed.len(), failed.join("; "))));
            }
            Ok(())
        }
        Command::ValidateSampler(args) => {
            let (file, jobs) = args.load()?;
            let (rows, path) = run_sampler_validation(&file, &args.out, jobs)?;
            println!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        Command::Aggregate { out, grid } => {
            if grid < 2 {
                return Err(BenchError::Config("--grid must be at least 2".into()));
            }
            let path = aggregate_dir(&out, grid)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error kind={} message={:?}", e.kind(), e.to_string());
            ExitCode::FAILURE
        }
    }
}
