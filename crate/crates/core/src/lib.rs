//! Cost-aware multi-fidelity Bayesian optimization.
//!
//! The surrogate is a Gaussian process with a Matérn 5/2 kernel over an
//! augmented space `(x, s)`, where `s ∈ [0, 1]` is a fidelity knob and
//! `s = 0` is the true objective. The kernel supports covariances between
//! values, gradients and Hessian entries, which lets the acquisition
//! function condition on the conditions that hold at a minimizer.
//!
//! Module map:
//! * [`kernel`] / [`gp`]: Matérn 5/2 kernel with derivatives and exact GP regression.
//! * [`slice`] / [`hyper`]: slice sampling and the hyperparameter mixture posterior.
//! * [`ep`]: expectation propagation over the minimizer constraint block.
//! * [`minimizer`]: weighted local-Hessian support sampling, baselines and metrics.
//! * [`pes`]: predictive entropy search change in entropy and its optimizer.
//! * [`cost`]: evaluation cost GP, overhead power law and budget accounting.
//! * [`optimizer`]: the outer loop with posterior-minimum reporting.
//! * [`objectives`]: benchmark functions, fidelity transforms and cost curves.
//!
//! The crate is `no_std` and only needs `alloc`. The `std` feature (on by
//! default) lets `nalgebra` use a blocked matrix multiply.

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cost;
pub mod domain;
pub mod ep;
mod error;
pub mod gp;
pub mod hyper;
pub mod kernel;
mod linalg;
pub mod local;
pub mod minimizer;
pub mod normal;
pub mod objectives;
pub mod optimizer;
pub mod pes;
pub mod slice;

pub use error::{Error, Result};
