//! Median and interquartile range of immediate regret over a cost grid.
//!
//! Each run is a step function: at cost `c` its regret is the one reported
//! by the last row whose cumulative cost is at most `c`. A run contributes
//! to a grid point only between its first reported regret and its final
//! cost, and every output row records how many runs it summarizes.

use std::io::Write;
use std::path::{Path, PathBuf};

use envpes_core::optimizer::TraceRow;

use crate::error::{BenchError, Result};
use crate::trace::load_trace;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostAxis {
    /// Cumulative evaluation cost only.
    Eval,
    /// Evaluation cost plus selection overhead.
    Total,
}

impl CostAxis {
    pub fn name(self) -> &'static str {
        match self {
            CostAxis::Eval => "eval",
            CostAxis::Total => "total",
        }
    }

    fn of(self, row: &TraceRow) -> f64 {
        match self {
            CostAxis::Eval => row.cumulative_eval_cost_s,
            CostAxis::Total => row.cumulative_total_cost_s,
        }
    }
}

/// `(cost, regret)` at each row that reports a regret.
pub fn regret_curve(trace: &[TraceRow], axis: CostAxis) -> Vec<(f64, f64)> {
    trace.iter().filter_map(|r| r.immediate_regret.map(|ir| (axis.of(r), ir))).collect()
}

/// Final cost of a run along `axis`.
pub fn final_cost(trace: &[TraceRow], axis: CostAxis) -> f64 {
    trace.last().map_or(0.0, |r| axis.of(r))
}

/// Regret in force at cost `c`, if the run has reported one by then and
/// has not yet ended.
pub fn regret_at(trace: &[TraceRow], axis: CostAxis, c: f64) -> Option<f64> {
    if c > final_cost(trace, axis) {
        return None;
    }
    regret_curve(trace, axis).into_iter().take_while(|(cost, _)| *cost <= c).last().map(|(_, ir)| ir)
}

/// First cost at which the reported regret is at most `threshold`; infinite
/// if it never gets there.
pub fn cost_to_threshold(trace: &[TraceRow], axis: CostAxis, threshold: f64) -> f64 {
    regret_curve(trace, axis).into_iter().find(|(_, ir)| *ir <= threshold).map_or(f64::INFINITY, |(c, _)| c)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        return sorted[lo];
    }
    let t = pos - lo as f64;
    // Infinite entries (runs that never reached a threshold) stay infinite.
    if sorted[hi].is_infinite() {
        return if t > 0.0 { sorted[hi] } else { sorted[lo] };
    }
    sorted[lo] + t * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub axis: CostAxis,
    pub cost_s: f64,
    pub n_runs: usize,
    /// `(q25, median, q75)`, absent when no run covers this cost.
    pub stats: Option<(f64, f64, f64)>,
}

pub fn aggregate(traces: &[Vec<TraceRow>], grid_points: usize) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for axis in [CostAxis::Eval, CostAxis::Total] {
        let starts = traces.iter().filter_map(|t| regret_curve(t, axis).first().map(|p| p.0));
        let lo = starts.fold(f64::INFINITY, f64::min);
        let hi = traces.iter().map(|t| final_cost(t, axis)).fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() || !hi.is_finite() {
            continue;
        }
        let n = grid_points.max(2);
        for i in 0..n {
            let c = if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            let mut vals: Vec<f64> = traces.iter().filter_map(|t| regret_at(t, axis, c)).collect();
            vals.sort_by(f64::total_cmp);
            let stats = (!vals.is_empty()).then(|| (quantile(&vals, 0.25), quantile(&vals, 0.5), quantile(&vals, 0.75)));
            out.push(AggregateRow { axis, cost_s: c, n_runs: vals.len(), stats });
        }
    }
    out
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "cost_s", "n_runs", "median", "q25", "q75"])?;
    for r in rows {
        let (q25, med, q75) = match r.stats {
            Some((a, b, c)) => (a.to_string(), b.to_string(), c.to_string()),
            None => Default::default(),
        };
        w.write_record([r.axis.name().to_string(), r.cost_s.to_string(), r.n_runs.to_string(), med, q25, q75])?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

/// Trace files of a result directory, in run order.
pub fn trace_paths(dir: &Path) -> Result<Vec<PathBuf>> {
    let runs = dir.join("runs");
    let entries = std::fs::read_dir(&runs).map_err(|e| BenchError::io(&runs, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv") && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("run_")))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_traces(dir: &Path) -> Result<Vec<Vec<TraceRow>>> {
    trace_paths(dir)?.iter().map(|p| load_trace(p)).collect()
}

/// Reads every trace under `dir/runs` and writes `dir/aggregate.csv`.
pub fn aggregate_dir(dir: &Path, grid_points: usize) -> Result<PathBuf> {
    let traces = load_traces(dir)?;
    if traces.is_empty() {
        return Err(BenchError::Config(format!("no traces under {}", dir.join("runs").display())));
    }
    let rows = aggregate(&traces, grid_points);
    let path = dir.join("aggregate.csv");
    let file = std::fs::File::create(&path).map_err(|e| BenchError::io(&path, e))?;
    write_aggregate(std::io::BufWriter::new(file), &rows)?;
    Ok(path)
}
