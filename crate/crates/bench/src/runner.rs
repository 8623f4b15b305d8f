//! Runs experiments and persists their traces.

use std::path::{Path, PathBuf};
use std::time::Instant;

use envpes_core::optimizer::{Clock, Optimizer, TraceRow};
use rayon::prelude::*;

use crate::aggregate::aggregate_dir;
use crate::config::ExperimentFile;
use crate::error::{BenchError, Result};
use crate::trace::{save_trace, RunMeta};

/// Wall-clock seconds since construction.
#[derive(Clone, Copy, Debug)]
pub struct WallClock(Instant);

impl WallClock {
    pub fn new() -> Self {
        WallClock(Instant::now())
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&mut self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub run_index: usize,
    pub seed: u64,
    pub dim: usize,
    pub f_star: f64,
    pub trace: Vec<TraceRow>,
    /// Set when the run aborted; the trace is then partial.
    pub error: Option<String>,
}

/// One optimization run of `file` with `seed`.
pub fn run_single(file: &ExperimentFile, run_index: usize, seed: u64) -> Result<RunResult> {
    let bench = file.benchmark(seed)?;
    let dim = bench.domain().dim();
    let f_star = bench.f_star();
    let opt = Optimizer::new(file.optimizer_config()?, bench, WallClock::new(), seed)?;
    let out = opt.run();
    Ok(RunResult { run_index, seed, dim, f_star, trace: out.trace, error: out.error.map(|e| e.to_string()) })
}

/// Maps `f` over the configured runs on at most `jobs` threads, keeping run
/// order.
pub fn for_each_run<T, F>(file: &ExperimentFile, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, u64) -> Result<T> + Sync,
{
    let runs: Vec<(usize, u64)> = file.run_seeds().enumerate().collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    pool.install(|| runs.par_iter().map(|&(i, seed)| f(i, seed)).collect())
}

#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub runs: Vec<RunResult>,
    pub aggregate: PathBuf,
}

impl ExperimentSummary {
    pub fn failed(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter(|r| r.error.is_some())
    }
}

pub fn run_file_name(run_index: usize) -> String {
    format!("run_{run_index:03}")
}

pub(crate) fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| BenchError::io(path, e))
}

/// Runs every configured seed, writes `runs/run_NNN.csv` with a
/// `.meta.toml` sidecar each, echoes the config and aggregates.
pub fn run_experiment(file: &ExperimentFile, out: &Path, jobs: usize) -> Result<ExperimentSummary> {
    let runs_dir = out.join("runs");
    create_dir(&runs_dir)?;
    let config_path = out.join("config.toml");
    std::fs::write(&config_path, file.to_toml_string()).map_err(|e| BenchError::io(&config_path, e))?;
    let runs = for_each_run(file, jobs, |i, seed| {
        let result = run_single(file, i, seed)?;
        let stem = run_file_name(i);
        save_trace(&runs_dir.join(format!("{stem}.csv")), &result.trace, result.dim)?;
        RunMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            run_index: i,
            seed,
            f_star: result.f_star,
            rows: result.trace.len(),
            error: result.error.clone(),
            config: file.clone(),
        }
        .save(&runs_dir.join(format!("{stem}.meta.toml")))?;
        Ok(result)
    })?;
    let aggregate = aggregate_dir(out, file.aggregate.grid_points)?;
    Ok(ExperimentSummary { runs, aggregate })
}
