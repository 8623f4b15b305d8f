use alloc::boxed::Box;
use alloc::string::String;

use crate::kernel::Deriv;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid kernel spec: {0}")]
    InvalidSpec(&'static str),
    #[error("unsupported derivative pair {a:?} / {b:?}")]
    UnsupportedDerivative { a: Deriv, b: Deriv },
    #[error("gram matrix not positive definite after jitter {jitter:e}")]
    IllConditioned { jitter: f64 },
    #[error("no observations")]
    EmptyData,
    #[error("invalid observation: {0}")]
    InvalidObservation(&'static str),
    #[error("log density is not finite at the initial point")]
    InvalidStart,
    #[error("truncation mass below 1e-300")]
    NegligibleMass,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("every minimizer draw failed; acquisition unavailable")]
    AcquisitionUnavailable,
    #[error("invalid cost record: {0}")]
    InvalidRecord(&'static str),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
}
