//! Predictive entropy search over the augmented `(x, s)` space.
//!
//! For each hyperparameter state, a handful of minimizer draws in the
//! `s = 0` plane are turned into constraint blocks (value, gradient and
//! Hessian at the draw), conditioned with EP, and kept as pseudo-observation
//! conditioners. The information gain at a candidate is the drop in
//! predictive entropy of `y` once the block conditions are imposed,
//! averaged over draws and states.

use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use crate::domain::{Domain, Halton};
use crate::ep::{ep_condition, Conditioner, Constraint, ConstraintBlock, ConstraintKind, EpConfig};
use crate::gp::GpState;
use crate::hyper::HyperPosteriorSet;
use crate::kernel::{Deriv, Radial};
use crate::local::{fd_gradient, minimize_box, LocalOptions};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PesConfig {
    /// Minimizer draws per hyperparameter state.
    pub n_min_draws: usize,
    /// Extra draws tried when EP fails on a draw.
    pub max_replacements: usize,
    /// Impose `f(x_d) ≤ min(y)`. Off when the objective is searched over a
    /// fidelity variable.
    pub global_min_constraint: bool,
    /// Impose non-negative Hessian diagonal and zero off-diagonal terms.
    pub hessian_conditions: bool,
    /// Information gains below `-clamp_tol` are counted before clamping.
    pub clamp_tol: f64,
    pub ep: EpConfig,
}

impl Default for PesConfig {
    fn default() -> Self {
        PesConfig {
            n_min_draws: 10,
            max_replacements: 3,
            global_min_constraint: false,
            hessian_conditions: true,
            clamp_tol: 1e-6,
            ep: EpConfig::default(),
        }
    }
}

/// Block layout at a minimizer draw over `d` search dimensions.
pub fn block_kinds(d: usize, hessian: bool) -> Vec<Deriv> {
    let mut kinds = vec![Deriv::Value];
    kinds.extend((0..d).map(Deriv::Grad));
    if hessian {
        kinds.extend((0..d).map(|i| Deriv::Hess(i, i)));
        for i in 0..d {
            for j in i + 1..d {
                kinds.push(Deriv::Hess(i, j));
            }
        }
    }
    kinds
}

/// A minimizer draw with its EP-conditioned block, ready for cheap
/// per-candidate queries.
#[derive(Clone, Debug)]
pub struct MinimizerDraw {
    /// Augmented location `(x_d, 0)`.
    pub location: Vec<f64>,
    /// Number of posterior draws that picked this location.
    pub multiplicity: usize,
    pub converged: bool,
    kinds: Vec<Deriv>,
    /// `L⁻¹ K(X, block)`.
    whitened: DMatrix<f64>,
    conditioner: Conditioner,
}

impl MinimizerDraw {
    pub fn new(state: &GpState, x: &[f64], y_min: Option<f64>, cfg: &PesConfig) -> Result<Self> {
        let d = x.len();
        if d + 1 != state.dim() {
            return Err(Error::Domain("minimizer draw dimension does not match the model"));
        }
        let mut location = x.to_vec();
        location.push(0.0);
        let kinds = block_kinds(d, cfg.hessian_conditions);
        let queries: Vec<(&[f64], Deriv)> = kinds.iter().map(|k| (location.as_slice(), *k)).collect();
        let (mean, cov) = state.posterior_unchecked(&queries);
        let mut constraints = Vec::with_capacity(kinds.len());
        for (i, k) in kinds.iter().enumerate() {
            let kind = match k {
                Deriv::Value => match y_min {
                    Some(y) if cfg.global_min_constraint => ConstraintKind::LessEq(y),
                    _ => continue,
                },
                Deriv::Grad(_) => ConstraintKind::Equal(0.0),
                Deriv::Hess(a, b) if a == b => ConstraintKind::GreaterEq(0.0),
                Deriv::Hess(..) => ConstraintKind::Equal(0.0),
            };
            constraints.push(Constraint { index: i, kind });
        }
        let ep = ep_condition(&ConstraintBlock { mean, cov, constraints }, &cfg.ep)?;
        let whitened = state.whitened_cross(&queries);
        Ok(MinimizerDraw { location, multiplicity: 1, converged: ep.converged, kinds, whitened, conditioner: ep.conditioner().clone() })
    }

    /// Posterior cross-covariance between the latent value at `z` and the
    /// block, given the whitened data cross-covariance `wz = L⁻¹ k(X, z)`.
    fn cross(&self, state: &GpState, z: &[f64], wz: &DVector<f64>, out: &mut Vec<f64>) {
        let r = Radial::new(state.spec(), z, &self.location);
        let reduce = self.whitened.tr_mul(wz);
        out.clear();
        out.extend(self.kinds.iter().zip(reduce.iter()).map(|(k, w)| r.cov(Deriv::Value, *k) - w));
    }

    /// Latent variance at `z` after conditioning on the block.
    pub fn conditioned_variance(&self, state: &GpState, z: &[f64]) -> f64 {
        let k = state.cross(z, Deriv::Value);
        let wz = state.whiten(&k);
        let u = (state.spec().amplitude - wz.norm_squared()).max(0.0);
        let mut c = Vec::new();
        self.cross(state, z, &wz, &mut c);
        u - self.conditioner.variance_reduction(&c)
    }
}

/// Conditioned draws for every hyperparameter state that has at least one.
#[derive(Debug)]
pub struct AcquisitionContext<'a> {
    gp: &'a HyperPosteriorSet,
    draws: Vec<(usize, Vec<MinimizerDraw>)>,
    cfg: PesConfig,
    clamped: AtomicUsize,
    failed_draws: usize,
}

impl<'a> AcquisitionContext<'a> {
    /// `argmins[k]` lists, for state `k`, indices into `support` of
    /// posterior argmin draws in the order they were sampled. The first
    /// `n_min_draws` are used; a draw whose EP fails is replaced by the next
    /// one, at most `max_replacements` times.
    pub fn build(gp: &'a HyperPosteriorSet, support: &[Vec<f64>], argmins: &[Vec<usize>], cfg: &PesConfig) -> Result<Self> {
        let observed: Vec<Vec<f64>> = gp
            .data()
            .iter()
            .filter(|o| o.kind == Deriv::Value)
            .map(|o| {
                let mut z = o.location.clone();
                *z.last_mut().expect("augmented location") = 0.0;
                z
            })
            .collect();
        let mut draws = Vec::new();
        let mut failed = 0;
        for (k, (state, picks)) in gp.states().iter().zip(argmins).enumerate() {
            let mut built: Vec<(usize, MinimizerDraw)> = Vec::new();
            let mut used = 0;
            let mut retries = 0;
            // Values at s > 0 are not values of f, so the bound is the
            // smallest full-fidelity posterior mean over observed locations.
            let y_min = observed.iter().map(|z| state.mean_value(z)).fold(f64::INFINITY, f64::min);
            let y_min = y_min.is_finite().then_some(y_min);
            for &idx in picks {
                if used >= cfg.n_min_draws {
                    break;
                }
                if let Some((_, d)) = built.iter_mut().find(|(i, _)| *i == idx) {
                    d.multiplicity += 1;
                    used += 1;
                    continue;
                }
                match MinimizerDraw::new(state, &support[idx], y_min, cfg) {
                    Ok(d) => {
                        built.push((idx, d));
                        used += 1;
                    }
                    Err(_) => {
                        failed += 1;
                        retries += 1;
                        if retries > cfg.max_replacements {
                            break;
                        }
                    }
                }
            }
            if !built.is_empty() {
                draws.push((k, built.into_iter().map(|(_, d)| d).collect()));
            }
        }
        if draws.is_empty() {
            return Err(Error::AcquisitionUnavailable);
        }
        Ok(AcquisitionContext { gp, draws, cfg: cfg.clone(), clamped: AtomicUsize::new(0), failed_draws: failed })
    }

    pub fn draws(&self) -> impl Iterator<Item = (&GpState, &[MinimizerDraw])> {
        self.draws.iter().map(|(k, d)| (&self.gp.states()[*k], d.as_slice()))
    }

    pub fn n_states(&self) -> usize {
        self.draws.len()
    }

    /// Draws discarded because EP failed on them.
    pub fn failed_draws(&self) -> usize {
        self.failed_draws
    }

    /// Times a negative information gain beyond tolerance was clamped.
    pub fn clamped(&self) -> usize {
        self.clamped.load(Ordering::Relaxed)
    }

    /// Expected drop in predictive entropy of an observation at `z`
    /// (augmented coordinates), including observation noise on both sides.
    pub fn delta_entropy(&self, z: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut weight = 0usize;
        let mut c = Vec::new();
        for (k, draws) in &self.draws {
            let state = &self.gp.states()[*k];
            let kz = state.cross(z, Deriv::Value);
            let wz = state.whiten(&kz);
            let u = (state.spec().amplitude - wz.norm_squared()).max(0.0);
            let noise = state.noise_var();
            for d in draws {
                d.cross(state, z, &wz, &mut c);
                let cond = (u - d.conditioner.variance_reduction(&c)).max(0.0);
                let mut dh = 0.5 * libm::log((u + noise) / (cond + noise));
                if !dh.is_finite() {
                    dh = 0.0;
                }
                if dh < 0.0 {
                    if dh < -self.cfg.clamp_tol {
                        self.clamped.fetch_add(1, Ordering::Relaxed);
                    }
                    dh = 0.0;
                }
                total += dh * d.multiplicity as f64;
                weight += d.multiplicity;
            }
        }
        total / weight as f64
    }

    /// Information gain per unit of expected cost.
    pub fn acquisition(&self, z: &[f64], cost_divisor: f64) -> Result<f64> {
        acquisition_value(self.delta_entropy(z), cost_divisor)
    }
}

pub fn acquisition_value(delta_h: f64, cost_divisor: f64) -> Result<f64> {
    if !(cost_divisor > 0.0) || !cost_divisor.is_finite() {
        return Err(Error::Domain("cost divisor must be positive"));
    }
    Ok(delta_h / cost_divisor)
}

/// Settings for the global search over the acquisition surface.
#[derive(Clone, Debug, PartialEq)]
pub struct AcquisitionSearch {
    /// Low-discrepancy candidates per augmented dimension.
    pub candidates_per_dim: usize,
    /// Fidelity levels at which support points are tried.
    pub s_grid: Vec<f64>,
    /// Best candidates polished by local ascent.
    pub n_refine: usize,
    /// Restrict the search to `s = 0`.
    pub fix_s: bool,
    pub local: LocalOptions,
}

impl Default for AcquisitionSearch {
    fn default() -> Self {
        AcquisitionSearch {
            candidates_per_dim: 100,
            s_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_refine: 5,
            fix_s: false,
            local: LocalOptions { max_iters: 50, gtol: 1e-10, xtol: 1e-9 },
        }
    }
}

/// Candidate order: larger value first, then lower `s`, then
/// lexicographically smaller `x`.
fn better(a: (f64, &[f64]), b: (f64, &[f64])) -> bool {
    let tol = 1e-12 * a.0.abs().max(b.0.abs());
    if a.0 > b.0 + tol {
        return true;
    }
    if b.0 > a.0 + tol {
        return false;
    }
    let d = a.1.len() - 1;
    match a.1[d].total_cmp(&b.1[d]) {
        core::cmp::Ordering::Less => true,
        core::cmp::Ordering::Greater => false,
        core::cmp::Ordering::Equal => a.1[..d] < b.1[..d],
    }
}

/// Maximizes `alpha` over `domain × [0, 1]` (or `domain × {0}` when
/// `fix_s`). Returns the augmented point and its value.
pub fn optimize_acquisition<F>(
    mut alpha: F,
    domain: &Domain,
    support: &[Vec<f64>],
    search: &AcquisitionSearch,
    seed: u64,
) -> Result<(Vec<f64>, f64)>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let d = domain.dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let free = if search.fix_s { d } else { d + 1 };
    let shift: Vec<f64> = (0..free).map(|_| rng.random::<f64>()).collect();
    let mut cands: Vec<Vec<f64>> = Vec::new();
    let mut corner = domain.lo().to_vec();
    corner.push(0.0);
    cands.push(corner);
    for u in Halton::shifted(shift).take(search.candidates_per_dim * (d + 1)) {
        let mut p = domain.from_unit(&u[..d]);
        p.push(if search.fix_s { 0.0 } else { u[d] });
        cands.push(p);
    }
    for x in support {
        for &s in &search.s_grid {
            if search.fix_s && s != 0.0 {
                continue;
            }
            let mut p = x.clone();
            p.push(s);
            cands.push(p);
        }
    }
    let mut scored: Vec<(f64, Vec<f64>)> = Vec::with_capacity(cands.len());
    for p in cands {
        let v = alpha(&p)?;
        scored.push((if v.is_finite() { v } else { f64::NEG_INFINITY }, p));
    }
    scored.sort_by(|a, b| {
        if better((a.0, &a.1), (b.0, &b.1)) {
            core::cmp::Ordering::Less
        } else if better((b.0, &b.1), (a.0, &a.1)) {
            core::cmp::Ordering::Greater
        } else {
            core::cmp::Ordering::Equal
        }
    });
    let (mut best_v, mut best) = scored[0].clone();

    let mut lo = domain.lo().to_vec();
    let mut hi = domain.hi().to_vec();
    lo.push(0.0);
    hi.push(if search.fix_s { 0.0 } else { 1.0 });
    let step = 1e-6 * domain.widths().iter().fold(1.0f64, |a, b| a.min(*b));
    let mut err = None;
    for (v0, start) in scored.iter().take(search.n_refine) {
        if !v0.is_finite() {
            continue;
        }
        let mut neg = |p: &[f64]| match alpha(p) {
            Ok(v) if v.is_finite() => -v,
            Ok(_) => f64::INFINITY,
            Err(e) => {
                err = Some(e);
                f64::INFINITY
            }
        };
        let res = minimize_box(
            |p, g| {
                let f = neg(p);
                fd_gradient(&mut neg, p, &lo, &hi, step, g);
                f
            },
            start,
            &lo,
            &hi,
            &search.local,
        );
        if let Some(e) = err.take() {
            return Err(e);
        }
        let v = -res.f;
        if v > *v0 && better((v, &res.x), (best_v, &best)) {
            best_v = v;
            best = res.x;
        }
    }
    Ok((best, best_v))
}
