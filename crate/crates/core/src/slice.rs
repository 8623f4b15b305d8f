//! Univariate-update slice sampling with stepping out and shrinkage.

use alloc::vec::Vec;

use rand::Rng;

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SliceConfig {
    pub burn_in: usize,
    pub thin: usize,
    /// Initial bracket width per coordinate.
    pub step_width: f64,
    /// Maximum number of widths the bracket may grow to.
    pub max_step_out: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        SliceConfig { burn_in: 100, thin: 10, step_width: 1.0, max_step_out: 10 }
    }
}

#[derive(Clone, Debug)]
pub struct SliceRun {
    pub samples: Vec<Vec<f64>>,
    /// Log density at each returned sample.
    pub log_densities: Vec<f64>,
    /// Brackets that hit `max_step_out` while still inside the slice.
    pub capped_brackets: usize,
}

/// Draws `n` states after `burn_in` sweeps, keeping every `thin`-th sweep.
/// A sweep updates each coordinate once in order.
pub fn slice_sample<F, R>(mut logdensity: F, init: &[f64], n: usize, cfg: &SliceConfig, rng: &mut R) -> Result<SliceRun>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut x = init.to_vec();
    let mut lp = logdensity(&x);
    if !lp.is_finite() {
        return Err(Error::InvalidStart);
    }
    let thin = cfg.thin.max(1);
    let w = if cfg.step_width > 0.0 { cfg.step_width } else { 1.0 };
    let m = cfg.max_step_out.max(1);
    let mut out = SliceRun { samples: Vec::with_capacity(n), log_densities: Vec::with_capacity(n), capped_brackets: 0 };
    let total = cfg.burn_in + n * thin;
    for sweep in 1..=total {
        for i in 0..x.len() {
            lp = update_coordinate(&mut logdensity, &mut x, lp, i, w, m, rng, &mut out.capped_brackets);
        }
        if sweep > cfg.burn_in && (sweep - cfg.burn_in) % thin == 0 {
            out.samples.push(x.clone());
            out.log_densities.push(lp);
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn update_coordinate<F, R>(
    logdensity: &mut F,
    x: &mut [f64],
    lp: f64,
    i: usize,
    w: f64,
    m: usize,
    rng: &mut R,
    capped: &mut usize,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let x0 = x[i];
    let e: f64 = -libm::log(1.0 - rng.random::<f64>());
    let level = lp - e;
    let mut eval = |x: &mut [f64], v: f64| {
        x[i] = v;
        let l = logdensity(x);
        if l.is_nan() {
            f64::NEG_INFINITY
        } else {
            l
        }
    };

    let mut left = x0 - w * rng.random::<f64>();
    let mut right = left + w;
    let mut j = libm::floor(m as f64 * rng.random::<f64>()) as usize;
    let mut k = (m - 1).saturating_sub(j);
    while eval(x, left) > level {
        if j == 0 {
            *capped += 1;
            break;
        }
        left -= w;
        j -= 1;
    }
    while eval(x, right) > level {
        if k == 0 {
            *capped += 1;
            break;
        }
        right += w;
        k -= 1;
    }

    for _ in 0..200 {
        let cand = left + (right - left) * rng.random::<f64>();
        let l = eval(x, cand);
        if l > level {
            return l;
        }
        if cand < x0 {
            left = cand;
        } else {
            right = cand;
        }
    }
    x[i] = x0;
    lp
}
