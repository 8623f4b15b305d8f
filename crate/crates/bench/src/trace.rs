//! Trace CSV files and their metadata sidecars.
//!
//! Columns: `step`, `x_0..x_{d-1}`, `s`, `y`, `eval_cost_s`, `overhead_s`,
//! `x_rec_0..`, `rec_mean`, `immediate_regret`, `cumulative_eval_cost_s`,
//! `cumulative_total_cost_s`, `flags`, then the diagnostics
//! `predicted_cost_s`, `n_remaining` and `clamped`. Missing values are empty
//! cells and flags are `;`-separated names. Floats use the shortest text
//! that parses back to the same bits, so a trace survives a round trip
//! exactly.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use envpes_core::optimizer::{Flags, TraceRow};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentFile;
use crate::error::{BenchError, Result};

pub fn header(d: usize) -> Vec<String> {
    let mut h = vec!["step".to_string()];
    h.extend((0..d).map(|i| format!("x_{i}")));
    h.extend(["s", "y", "eval_cost_s", "overhead_s"].map(String::from));
    h.extend((0..d).map(|i| format!("x_rec_{i}")));
    h.extend(
        [
            "rec_mean",
            "immediate_regret",
            "cumulative_eval_cost_s",
            "cumulative_total_cost_s",
            "flags",
            "predicted_cost_s",
            "n_remaining",
            "clamped",
        ]
        .map(String::from),
    );
    h
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(row: &TraceRow, d: usize) -> Vec<String> {
    let mut r = vec![row.step.to_string()];
    r.extend(row.x.iter().map(f64::to_string));
    r.extend([row.s, row.y, row.eval_cost_s, row.overhead_s].map(|v| v.to_string()));
    match &row.x_rec {
        Some(x) => r.extend(x.iter().map(f64::to_string)),
        None => r.extend((0..d).map(|_| String::new())),
    }
    r.push(opt(row.rec_mean));
    r.push(opt(row.immediate_regret));
    r.push(row.cumulative_eval_cost_s.to_string());
    r.push(row.cumulative_total_cost_s.to_string());
    r.push(row.flags.names().collect::<Vec<_>>().join(";"));
    r.push(opt(row.predicted_cost_s));
    r.push(opt(row.n_remaining));
    r.push(row.clamped.to_string());
    r
}

pub fn write_trace<W: Write>(out: W, rows: &[TraceRow], d: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(d))?;
    for row in rows {
        w.write_record(record(row, d))?;
    }
    w.flush().map_err(|e| BenchError::Csv(e.into()))?;
    Ok(())
}

pub fn save_trace(path: &Path, rows: &[TraceRow], d: usize) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_trace(std::io::BufWriter::new(file), rows, d)
}

/// Reads a trace written by [`save_trace`].
pub fn load_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let bad = |message: String| BenchError::Trace { path: path.to_path_buf(), message };
    let mut rdr = csv::Reader::from_path(path)?;
    let head = rdr.headers()?.clone();
    let d = head.iter().filter(|h| h.starts_with("x_") && !h.starts_with("x_rec_")).count();
    if head.iter().collect::<Vec<_>>() != header(d) {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let cell = |i: usize| rec.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> { cell(i).parse::<f64>().map_err(|_| bad(format!("row {line}: bad number in column {i}"))) };
        let maybe = |i: usize| -> Result<Option<f64>> { if cell(i).is_empty() { Ok(None) } else { num(i).map(Some) } };
        let int = |i: usize| -> Result<usize> { cell(i).parse::<usize>().map_err(|_| bad(format!("row {line}: bad integer in column {i}"))) };
        let mut c = 0;
        let step = int(c)?;
        c += 1;
        let x = (c..c + d).map(num).collect::<Result<Vec<_>>>()?;
        c += d;
        let (s, y, eval_cost_s, overhead_s) = (num(c)?, num(c + 1)?, num(c + 2)?, num(c + 3)?);
        c += 4;
        let x_rec = if cell(c).is_empty() { None } else { Some((c..c + d).map(num).collect::<Result<Vec<_>>>()?) };
        c += d;
        let rec_mean = maybe(c)?;
        let immediate_regret = maybe(c + 1)?;
        let cumulative_eval_cost_s = num(c + 2)?;
        let cumulative_total_cost_s = num(c + 3)?;
        let flags = if cell(c + 4).is_empty() {
            Flags::default()
        } else {
            Flags::from_names(cell(c + 4).split(';')).ok_or_else(|| bad(format!("row {line}: unknown flag")))?
        };
        let predicted_cost_s = maybe(c + 5)?;
        let n_remaining = if cell(c + 6).is_empty() { None } else { Some(int(c + 6)?) };
        let clamped = int(c + 7)?;
        rows.push(TraceRow {
            step,
            x,
            s,
            y,
            eval_cost_s,
            overhead_s,
            predicted_cost_s,
            n_remaining,
            x_rec,
            rec_mean,
            immediate_regret,
            cumulative_eval_cost_s,
            cumulative_total_cost_s,
            clamped,
            flags,
        });
    }
    Ok(rows)
}

/// Sidecar written next to each trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub run_index: usize,
    pub seed: u64,
    pub f_star: f64,
    pub rows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: ExperimentFile,
}

impl RunMeta {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| BenchError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        toml::from_str(&text).map_err(|e| BenchError::Trace { path: path.to_path_buf(), message: e.message().to_string() })
    }
}
