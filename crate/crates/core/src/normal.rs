//! Univariate normal helpers: density, distribution function, one-sided
//! truncated moments and differential entropy.

use core::f64::consts::{E, PI, SQRT_2};

use crate::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn pdf(z: f64) -> f64 {
    INV_SQRT_2PI * libm::exp(-0.5 * z * z)
}

pub fn cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// Which side of the bound carries the mass after truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Keep `x ≤ bound`.
    Le,
    /// Keep `x ≥ bound`.
    Ge,
}

/// First two moments of `N(mu, var)` restricted to one side of `bound`.
///
/// Returns [`Error::NegligibleMass`] when the retained probability is below
/// `1e-300`, and [`Error::Domain`] for a non-positive variance.
pub fn truncated_moments(mu: f64, var: f64, bound: f64, side: Side) -> Result<(f64, f64)> {
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::Domain("truncated_moments needs a positive variance"));
    }
    let sd = libm::sqrt(var);
    // Reflect the ≥ case onto ≤ so one code path handles both.
    let (alpha, sign) = match side {
        Side::Le => ((bound - mu) / sd, 1.0),
        Side::Ge => ((mu - bound) / sd, -1.0),
    };
    let mass = cdf(alpha);
    if !(mass >= 1e-300) {
        return Err(Error::NegligibleMass);
    }
    let lambda = pdf(alpha) / mass;
    let mean = mu - sign * sd * lambda;
    let shrink = (1.0 - alpha * lambda - lambda * lambda).clamp(f64::MIN_POSITIVE, 1.0);
    Ok((mean, var * shrink))
}

/// Differential entropy of a Gaussian, `½ log(2πe·variance)`.
pub fn gaussian_entropy(variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Domain("entropy needs a positive variance"));
    }
    Ok(0.5 * libm::log(2.0 * PI * E * variance))
}
