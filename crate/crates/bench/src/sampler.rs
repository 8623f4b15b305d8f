//! Support-sampler study: at each step of an optimization run, every
//! sampler proposes a support set on the same posterior, the argmin is
//! tallied over posterior draws and the tallies are scored.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use envpes_core::minimizer::{
    baseline_sampler, default_n_starts, draw_minimizer_samples, sampler_metrics, wlh_support, BaselineMethod,
    SamplerMetrics,
};
use envpes_core::optimizer::Optimizer;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aggregate::median;
use crate::config::ExperimentFile;
use crate::error::{BenchError, Result};
use crate::runner::{create_dir, for_each_run, WallClock};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerMethod {
    Uniform,
    EiSlice,
    LcbSlice,
    Wlh,
}

impl SamplerMethod {
    pub const ALL: [SamplerMethod; 4] = [SamplerMethod::Uniform, SamplerMethod::EiSlice, SamplerMethod::LcbSlice, SamplerMethod::Wlh];

    pub fn name(self) -> &'static str {
        match self {
            SamplerMethod::Uniform => "uniform",
            SamplerMethod::EiSlice => "ei-slice",
            SamplerMethod::LcbSlice => "lcb-slice",
            SamplerMethod::Wlh => "wlh",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerRow {
    pub objective: String,
    pub method: SamplerMethod,
    pub step: usize,
    pub metrics: SamplerMetrics,
    /// Argmin tallies; they sum to the number of posterior draws.
    pub total_count: usize,
}

fn objective_name(file: &ExperimentFile) -> String {
    toml::Value::try_from(file.objective.id).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// The study for one run. Support generation alone is timed.
pub fn validate_run(file: &ExperimentFile, seed: u64) -> Result<Vec<SamplerRow>> {
    let bench = file.benchmark(seed)?;
    let mut opt = Optimizer::new(file.optimizer_config()?, bench, WallClock::new(), seed)?;
    opt.initialize()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5a5a_5a5a_5a5a_5a5a);
    let s = &file.sampler;
    let name = objective_name(file);
    let d = opt.unit_domain().dim();
    let mut rows = Vec::new();
    for step in 0..s.steps {
        if step > 0 {
            opt.step()?;
        }
        let gp = opt.posterior(rng.next_u64())?;
        let domain = opt.unit_domain().clone();
        for method in SamplerMethod::ALL {
            let t0 = Instant::now();
            let points = match method {
                SamplerMethod::Wlh => wlh_support(&gp, &domain, s.support_size, default_n_starts(d), &mut rng).points,
                SamplerMethod::Uniform => baseline_sampler(&gp, &domain, s.support_size, BaselineMethod::Uniform, &mut rng)?.points,
                SamplerMethod::EiSlice => baseline_sampler(&gp, &domain, s.support_size, BaselineMethod::EiSlice, &mut rng)?.points,
                SamplerMethod::LcbSlice => baseline_sampler(&gp, &domain, s.support_size, BaselineMethod::LcbSlice, &mut rng)?.points,
            };
            let elapsed = t0.elapsed().as_secs_f64();
            let counts = draw_minimizer_samples(&gp, &points, s.argmin_samples, &mut rng)?;
            rows.push(SamplerRow {
                objective: name.clone(),
                method,
                step,
                metrics: sampler_metrics(&counts, elapsed),
                total_count: counts.iter().sum(),
            });
        }
    }
    Ok(rows)
}

pub fn write_rows<W: Write>(out: W, rows: &[SamplerRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["objective", "method", "step", "kl", "unused_pct", "time_s", "useful_rate"])?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.objective.clone(),
            r.method.name().to_string(),
            r.step.to_string(),
            m.kl.to_string(),
            m.unused_pct.to_string(),
            m.time_s.to_string(),
            m.useful_rate.to_string(),
        ])?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

/// Per-method medians and means over all rows.
#[derive(Clone, Debug, PartialEq)]
pub struct MethodSummary {
    pub method: SamplerMethod,
    pub n: usize,
    pub median_kl: f64,
    pub median_unused_pct: f64,
    pub median_time_s: f64,
    pub median_useful_rate: f64,
    pub mean_kl: f64,
    pub mean_time_s: f64,
}

pub fn summarize(rows: &[SamplerRow]) -> Vec<MethodSummary> {
    SamplerMethod::ALL
        .iter()
        .filter_map(|&method| {
            let sel: Vec<&SamplerMetrics> = rows.iter().filter(|r| r.method == method).map(|r| &r.metrics).collect();
            if sel.is_empty() {
                return None;
            }
            let col = |f: fn(&SamplerMetrics) -> f64| sel.iter().map(|m| f(m)).collect::<Vec<f64>>();
            let mean = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
            Some(MethodSummary {
                method,
                n: sel.len(),
                median_kl: median(&col(|m| m.kl)),
                median_unused_pct: median(&col(|m| m.unused_pct)),
                median_time_s: median(&col(|m| m.time_s)),
                median_useful_rate: median(&col(|m| m.useful_rate)),
                mean_kl: mean(col(|m| m.kl)),
                mean_time_s: mean(col(|m| m.time_s)),
            })
        })
        .collect()
}

fn write_summary<W: Write>(out: W, objective: &str, summary: &[MethodSummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "objective",
        "method",
        "n",
        "median_kl",
        "median_unused_pct",
        "median_time_s",
        "median_useful_rate",
        "mean_kl",
        "mean_time_s",
    ])?;
    for s in summary {
        w.write_record([
            objective.to_string(),
            s.method.name().to_string(),
            s.n.to_string(),
            s.median_kl.to_string(),
            s.median_unused_pct.to_string(),
            s.median_time_s.to_string(),
            s.median_useful_rate.to_string(),
            s.mean_kl.to_string(),
            s.mean_time_s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

/// Runs the study for every configured seed and writes `sampler.csv` and
/// `sampler_summary.csv` under `out`.
pub fn run_sampler_validation(file: &ExperimentFile, out: &Path, jobs: usize) -> Result<(Vec<SamplerRow>, PathBuf)> {
    create_dir(out)?;
    let rows: Vec<SamplerRow> = for_each_run(file, jobs, |_, seed| validate_run(file, seed))?.into_iter().flatten().collect();
    let path = out.join("sampler.csv");
    let f = std::fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
    write_rows(std::io::BufWriter::new(f), &rows)?;
    let spath = out.join("sampler_summary.csv");
    let f = std::fs::File::create(&spath).map_err(|e| BenchError::io(&spath, e))?;
    write_summary(std::io::BufWriter::new(f), &objective_name(file), &summarize(&rows))?;
    Ok((rows, path))
}
