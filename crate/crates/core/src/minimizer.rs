//! Support points for the distribution of the global minimizer.
//!
//! The fast proposal is a weighted mixture of local-Hessian Gaussians:
//! local minima of the posterior mean in the `s = 0` plane are found by
//! multi-start descent, each contributes `N(x_c, H⁻¹ Σ_g H⁻ᵀ)` where `H` is
//! the posterior mean Hessian and `Σ_g` the posterior gradient covariance,
//! and components are weighted by the probability that their value is
//! below the lowest candidate's. Slice sampling over expected improvement
//! or a lower-confidence-bound surface, and uniform draws, are kept as
//! baselines, along with the metrics used to compare them.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{Domain, Halton};
use crate::hyper::HyperPosteriorSet;
use crate::kernel::Deriv;
use crate::linalg::{jittered_cholesky, psd_sqrt, symmetrize};
use crate::local::{minimize_box, LocalOptions};
use crate::normal::{cdf, pdf};
use crate::slice::{slice_sample, SliceConfig};
use crate::{Error, Result};

/// A local minimum of the posterior mean with the local quantities needed
/// to turn it into a mixture component.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalMinCandidate {
    /// Location in the `s = 0` plane.
    pub x: Vec<f64>,
    /// Posterior mean value.
    pub mean: f64,
    /// Posterior variance of the value.
    pub variance: f64,
    /// Posterior mean Hessian.
    pub hessian: DMatrix<f64>,
    /// Posterior covariance of the gradient.
    pub grad_cov: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub center: Vec<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportSet {
    pub points: Vec<Vec<f64>>,
    /// Times each point was the argmin across the posterior draws.
    pub counts: Vec<usize>,
}

fn lift(x: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(x.len() + 1);
    v.extend_from_slice(x);
    v.push(0.0);
    v
}

pub fn default_n_starts(d: usize) -> usize {
    20.max(10 * d)
}

fn uniform_point<R: Rng + ?Sized>(domain: &Domain, rng: &mut R) -> Vec<f64> {
    domain.lo().iter().zip(domain.hi()).map(|(l, h)| l + (h - l) * rng.random::<f64>()).collect()
}

/// `m` independent uniform draws from the box.
pub fn uniform_support<R: Rng + ?Sized>(domain: &Domain, m: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..m).map(|_| uniform_point(domain, rng)).collect()
}

/// Local minima of the mixture posterior mean restricted to `s = 0`, from
/// `n_starts` Halton starts with a seeded shift.
pub fn find_posterior_minima(gp: &HyperPosteriorSet, domain: &Domain, n_starts: usize, seed: u64) -> Vec<LocalMinCandidate> {
    use rand::SeedableRng;
    let d = domain.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let starts: Vec<Vec<f64>> = Halton::shifted(shift).take(n_starts.max(1)).map(|u| domain.from_unit(&u)).collect();
    minima_from_starts(gp, domain, &starts)
}

/// Runs the descent from explicit start points.
pub fn minima_from_starts(gp: &HyperPosteriorSet, domain: &Domain, starts: &[Vec<f64>]) -> Vec<LocalMinCandidate> {
    let d = domain.dim();
    let min_h = gp.min_lengthscale(d);
    let gtol = 1e-5 * gp.mean_amplitude() / min_h;
    let opts = LocalOptions { max_iters: 300, gtol, xtol: 1e-14 };
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut loc = vec![0.0; d + 1];
    for start in starts {
        let res = minimize_box(
            |x, g| {
                loc[..d].copy_from_slice(x);
                loc[d] = 0.0;
                gp.mean_value_grad(&loc, d, g)
            },
            start,
            domain.lo(),
            domain.hi(),
            &opts,
        );
        if !res.f.is_finite() || res.projected_grad_norm >= gtol {
            continue;
        }
        let sep = 1e-3 * min_h;
        let dup = found.iter_mut().find(|(x, _)| x.iter().zip(&res.x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() <= sep * sep);
        match dup {
            Some(entry) => {
                if res.f < entry.1 {
                    *entry = (res.x, res.f);
                }
            }
            None => found.push((res.x, res.f)),
        }
    }
    found.into_iter().map(|(x, _)| candidate_at(gp, &x)).collect()
}

/// Posterior quantities at a candidate location.
pub fn candidate_at(gp: &HyperPosteriorSet, x: &[f64]) -> LocalMinCandidate {
    let d = x.len();
    let k = gp.k() as f64;
    let loc = lift(x);
    let mut queries: Vec<(&[f64], Deriv)> = Vec::with_capacity(d + 1);
    queries.push((&loc, Deriv::Value));
    for i in 0..d {
        queries.push((&loc, Deriv::Grad(i)));
    }
    let mut mean_sum = 0.0;
    let mut mean_sq = 0.0;
    let mut var_sum = 0.0;
    let mut hess = DMatrix::zeros(d, d);
    let mut gcov = DMatrix::zeros(d, d);
    let mut gmean = DVector::zeros(d);
    let mut gouter = DMatrix::zeros(d, d);
    for s in gp.states() {
        let (m, c) = s.posterior_unchecked(&queries);
        mean_sum += m[0];
        mean_sq += m[0] * m[0];
        var_sum += c[(0, 0)].max(0.0);
        let gm = m.rows(1, d).into_owned();
        gcov += c.view((1, 1), (d, d));
        gouter += &gm * gm.transpose();
        gmean += gm;
        hess += s.mean_hessian(&loc, d);
    }
    let mean = mean_sum / k;
    let variance = (var_sum / k + mean_sq / k - mean * mean).max(0.0);
    gmean /= k;
    let mut grad_cov = gcov / k + gouter / k - &gmean * gmean.transpose();
    symmetrize(&mut grad_cov);
    LocalMinCandidate { x: x.to_vec(), mean, variance, hessian: hess / k, grad_cov }
}

/// `N(x_c, H⁻¹ Σ_g H⁻ᵀ)` after symmetrizing `H` and lifting eigenvalues
/// below `1e-6·trace/d` to that floor. Fails when the trace is not
/// positive.
pub fn component_from_candidate(cand: &LocalMinCandidate) -> Result<MixtureComponent> {
    let d = cand.x.len();
    let mut h = cand.hessian.clone();
    symmetrize(&mut h);
    let trace = h.trace();
    if !(trace > 0.0) || !trace.is_finite() {
        return Err(Error::Domain("posterior mean Hessian has no positive curvature"));
    }
    let floor = 1e-6 * trace / d as f64;
    let eig = h.symmetric_eigen();
    let v = &eig.eigenvectors;
    let inv_diag = DMatrix::from_diagonal(&DVector::from_iterator(d, eig.eigenvalues.iter().map(|l| 1.0 / l.max(floor))));
    let hinv = v * inv_diag * v.transpose();
    let mut cov = &hinv * &cand.grad_cov * hinv.transpose();
    symmetrize(&mut cov);
    Ok(MixtureComponent { weight: 0.0, center: cand.x.clone(), cov })
}

/// Normalized win-probability weights: each candidate scores the
/// probability that its value is below the value at the lowest-mean
/// candidate.
pub fn compute_weights(cands: &[LocalMinCandidate]) -> Vec<f64> {
    let pairs: Vec<(f64, f64)> = cands.iter().map(|c| (c.mean, c.variance)).collect();
    win_weights(&pairs)
}

pub(crate) fn win_weights(pairs: &[(f64, f64)]) -> Vec<f64> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let best = pairs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let (c_best, v_best) = pairs[best];
    let raw: Vec<f64> = pairs
        .iter()
        .enumerate()
        .map(|(i, (c, v))| {
            if i == best {
                return 0.5;
            }
            let sd = libm::sqrt(v + v_best);
            if sd > 0.0 {
                cdf((c_best - c) / sd)
            } else if *c < c_best {
                1.0
            } else if *c == c_best {
                0.5
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// Draws `m` points from the weighted mixture, each component truncated to
/// the box by rejection (50 tries) and then clamping.
pub fn draw_support<R: Rng + ?Sized>(components: &[MixtureComponent], m: usize, domain: &Domain, rng: &mut R) -> Vec<Vec<f64>> {
    if components.is_empty() {
        return uniform_support(domain, m, rng);
    }
    let roots: Vec<DMatrix<f64>> = components.iter().map(|c| psd_sqrt(&c.cov)).collect();
    let total: f64 = components.iter().map(|c| c.weight).sum();
    let d = domain.dim();
    let mut out = Vec::with_capacity(m);
    let mut z = DVector::zeros(d);
    for _ in 0..m {
        let mut u = rng.random::<f64>() * total;
        let mut idx = components.len() - 1;
        for (i, c) in components.iter().enumerate() {
            if u < c.weight {
                idx = i;
                break;
            }
            u -= c.weight;
        }
        let comp = &components[idx];
        let mut point = comp.center.clone();
        let mut accepted = false;
        for _ in 0..50 {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(rng);
            }
            let step = &roots[idx] * &z;
            for i in 0..d {
                point[i] = comp.center[i] + step[i];
            }
            if domain.contains(&point) {
                accepted = true;
                break;
            }
        }
        if !accepted {
            domain.clamp(&mut point);
        }
        out.push(point);
    }
    out
}

/// Diagnostics from one weighted local-Hessian proposal.
#[derive(Clone, Debug)]
pub struct WlhSupport {
    pub points: Vec<Vec<f64>>,
    pub components: Vec<MixtureComponent>,
    /// True when no usable local minimum was found and the support is
    /// uniform instead.
    pub uniform_fallback: bool,
    pub dropped_candidates: usize,
}

/// The full proposal: minima search, components, weights and `m` draws.
pub fn wlh_support<R: Rng + ?Sized>(gp: &HyperPosteriorSet, domain: &Domain, m: usize, n_starts: usize, rng: &mut R) -> WlhSupport {
    let seed = rng.random::<u64>();
    let cands = find_posterior_minima(gp, domain, n_starts, seed);
    let mut kept = Vec::new();
    let mut comps = Vec::new();
    let mut dropped = 0;
    for c in cands {
        match component_from_candidate(&c) {
            Ok(comp) => {
                comps.push(comp);
                kept.push(c);
            }
            Err(_) => dropped += 1,
        }
    }
    if comps.is_empty() {
        return WlhSupport { points: uniform_support(domain, m, rng), components: comps, uniform_fallback: true, dropped_candidates: dropped };
    }
    for (c, w) in comps.iter_mut().zip(compute_weights(&kept)) {
        c.weight = w;
    }
    let points = draw_support(&comps, m, domain, rng);
    WlhSupport { points, components: comps, uniform_fallback: false, dropped_candidates: dropped }
}

/// For every posterior draw over the support (draw `i` uses hyperparameter
/// state `i mod K`), the index of the minimizing support point, grouped by
/// state.
pub fn sample_argmins<R: Rng + ?Sized>(gp: &HyperPosteriorSet, support: &[Vec<f64>], n_samples: usize, rng: &mut R) -> Result<Vec<Vec<usize>>> {
    if support.is_empty() {
        return Err(Error::Domain("support set is empty"));
    }
    let k = gp.k();
    let m = support.len();
    let lifted: Vec<Vec<f64>> = support.iter().map(|p| lift(p)).collect();
    let queries: Vec<(&[f64], Deriv)> = lifted.iter().map(|p| (p.as_slice(), Deriv::Value)).collect();
    let mut out = Vec::with_capacity(k);
    for (si, state) in gp.states().iter().enumerate() {
        let n_k = n_samples / k + usize::from(si < n_samples % k);
        if n_k == 0 {
            out.push(Vec::new());
            continue;
        }
        let (mean, cov) = state.posterior_unchecked(&queries);
        let (chol, _) = jittered_cholesky(&cov, state.spec().amplitude)?;
        let z = DMatrix::from_fn(m, n_k, |_, _| StandardNormal.sample(rng));
        let draws = chol.l() * z;
        let mut idx = Vec::with_capacity(n_k);
        for c in 0..n_k {
            let col = draws.column(c);
            let mut best = 0;
            let mut best_v = f64::INFINITY;
            for r in 0..m {
                let v = mean[r] + col[r];
                if v < best_v {
                    best_v = v;
                    best = r;
                }
            }
            idx.push(best);
        }
        out.push(idx);
    }
    Ok(out)
}

/// Argmin tallies over the support from `n_samples` joint posterior draws.
pub fn draw_minimizer_samples<R: Rng + ?Sized>(gp: &HyperPosteriorSet, support: &[Vec<f64>], n_samples: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut counts = vec![0usize; support.len()];
    for per_state in sample_argmins(gp, support, n_samples, rng)? {
        for i in per_state {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    EiSlice,
    LcbSlice,
    Uniform,
}

/// Exploration weight of the lower confidence bound surface.
pub const LCB_KAPPA: f64 = 2.0;

#[derive(Clone, Debug)]
pub struct BaselineSupport {
    pub points: Vec<Vec<f64>>,
    /// EI underflowed everywhere and the LCB surface was used instead.
    pub fell_back_to_lcb: bool,
}

/// Best posterior mean at the observed locations projected onto `s = 0`.
pub fn incumbent_value(gp: &HyperPosteriorSet) -> f64 {
    gp.data()
        .iter()
        .map(|o| {
            let mut loc = o.location.clone();
            let d = loc.len() - 1;
            loc[d] = 0.0;
            gp.mean_value(&loc)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Expected improvement below `best` under the mixture, at `s = 0`.
pub fn expected_improvement(gp: &HyperPosteriorSet, x: &[f64], best: f64) -> f64 {
    let loc = lift(x);
    gp.states()
        .iter()
        .map(|s| {
            let (m, v) = s.predict_value(&loc);
            let sd = libm::sqrt(v);
            if sd <= 0.0 {
                return (best - m).max(0.0);
            }
            let z = (best - m) / sd;
            (best - m) * cdf(z) + sd * pdf(z)
        })
        .sum::<f64>()
        / gp.k() as f64
}

/// `μ(x) − κσ(x)` of the mixture at `s = 0`.
pub fn lower_confidence_bound(gp: &HyperPosteriorSet, x: &[f64]) -> f64 {
    let loc = lift(x);
    let k = gp.k() as f64;
    let (mut ms, mut m2, mut vs) = (0.0, 0.0, 0.0);
    for s in gp.states() {
        let (m, v) = s.predict_value(&loc);
        ms += m;
        m2 += m * m;
        vs += v;
    }
    let mean = ms / k;
    let var = (vs / k + m2 / k - mean * mean).max(0.0);
    mean - LCB_KAPPA * libm::sqrt(var)
}

/// Slice sampling settings for the EI and LCB baselines.
pub fn baseline_slice_config() -> SliceConfig {
    SliceConfig { burn_in: 100, thin: 10, step_width: 0.1, max_step_out: 10 }
}

/// Support from a baseline proposal. The slice samplers treat EI, or
/// `exp(−LCB/scale)` with `scale` the sd of the observed values, as an
/// unnormalized density on the box.
pub fn baseline_sampler<R: Rng + ?Sized>(
    gp: &HyperPosteriorSet,
    domain: &Domain,
    m: usize,
    method: BaselineMethod,
    rng: &mut R,
) -> Result<BaselineSupport> {
    if m == 0 {
        return Err(Error::Domain("support size must be at least 1"));
    }
    if method == BaselineMethod::Uniform {
        return Ok(BaselineSupport { points: uniform_support(domain, m, rng), fell_back_to_lcb: false });
    }
    let best = incumbent_value(gp);
    let values: Vec<f64> = gp.data().iter().filter(|o| o.kind == Deriv::Value).map(|o| o.value).collect();
    let scale = {
        let n = values.len().max(1) as f64;
        let mu = values.iter().sum::<f64>() / n;
        let sd = libm::sqrt(values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n);
        if sd > 0.0 { sd } else { libm::sqrt(gp.mean_amplitude()) }
    };
    let ei_log = |x: &[f64]| {
        if !domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        libm::log(expected_improvement(gp, x, best))
    };
    let lcb_log = |x: &[f64]| {
        if !domain.contains(x) {
            return f64::NEG_INFINITY;
        }
        -lower_confidence_bound(gp, x) / scale
    };
    let d = domain.dim();
    let starts: Vec<Vec<f64>> = Halton::new(d).skip(1).take(100).map(|u| domain.from_unit(&u)).collect();
    let pick = |f: &dyn Fn(&[f64]) -> f64| {
        starts
            .iter()
            .map(|p| (f(p), p))
            .filter(|(v, _)| v.is_finite())
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, p)| p.clone())
    };
    let mut cfg = baseline_slice_config();
    cfg.step_width *= domain.widths().iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let (run, fell_back) = match (method, pick(&ei_log)) {
        (BaselineMethod::EiSlice, Some(start)) => (slice_sample(ei_log, &start, m, &cfg, rng)?, false),
        _ => {
            let start = pick(&lcb_log).ok_or(Error::Domain("LCB surface is not finite"))?;
            (slice_sample(lcb_log, &start, m, &cfg, rng)?, method == BaselineMethod::EiSlice)
        }
    };
    Ok(BaselineSupport { points: run.samples, fell_back_to_lcb: fell_back })
}

/// Quality metrics of a support set given its argmin tallies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerMetrics {
    /// KL divergence from the uniform distribution over the support to the
    /// Dirichlet-MAP multinomial fitted to the counts.
    pub kl: f64,
    pub unused_pct: f64,
    pub time_s: f64,
    pub n_useful: usize,
    /// `(n_useful − 1) / time_s`.
    pub useful_rate: f64,
}

/// Computes the metrics with a symmetric Dirichlet prior of concentration
/// `1 + 1/m`, so the MAP is `(count + 1/m) / (N + 1)`.
pub fn sampler_metrics(counts: &[usize], elapsed_s: f64) -> SamplerMetrics {
    let m = counts.len();
    let n: usize = counts.iter().sum();
    let mf = m as f64;
    let nf = n as f64;
    let kl = counts
        .iter()
        .map(|c| {
            let p = (*c as f64 + 1.0 / mf) / (nf + 1.0);
            (1.0 / mf) * libm::log((1.0 / mf) / p)
        })
        .sum::<f64>();
    let unused = counts.iter().filter(|c| **c == 0).count();
    let threshold = nf / (10.0 * mf);
    let n_useful = counts.iter().filter(|c| **c as f64 >= threshold && **c > 0).count();
    let numer = n_useful.saturating_sub(1) as f64;
    let useful_rate = if numer == 0.0 { 0.0 } else { numer / elapsed_s };
    SamplerMetrics { kl, unused_pct: 100.0 * unused as f64 / mf, time_s: elapsed_s, n_useful, useful_rate }
}
