//! Benchmark harness for `envpes-core`: experiment configs, the run loop
//! over seeds, trace files, cost-grid aggregation and the support-sampler
//! study.

pub mod aggregate;
pub mod config;
mod error;
pub mod runner;
pub mod sampler;
pub mod trace;

pub use error::{BenchError, Result};
