//! Gaussian approximation to a joint Gaussian conditioned on the
//! conditions that hold at a minimizer: equalities are applied by exact
//! conditioning, one-sided inequalities by expectation propagation with
//! one site per constrained coordinate.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{jittered_cholesky, max_diag, symmetrize, Chol};
use crate::normal::{truncated_moments, Side};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConstraintKind {
    Equal(f64),
    LessEq(f64),
    GreaterEq(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constraint {
    pub index: usize,
    pub kind: ConstraintKind,
}

/// Joint Gaussian over the quantities at a minimizer draw plus the
/// constraints to impose on them.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintBlock {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub constraints: Vec<Constraint>,
}

impl ConstraintBlock {
    pub fn validate(&self) -> Result<()> {
        let n = self.mean.len();
        if self.cov.nrows() != n || self.cov.ncols() != n {
            return Err(Error::Domain("block covariance shape does not match its mean"));
        }
        if self.constraints.iter().any(|c| c.index >= n) {
            return Err(Error::Domain("constraint index outside the block"));
        }
        if self.mean.iter().chain(self.cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("block moments must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpConfig {
    pub damping: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig { damping: 0.5, max_iters: 50, tol: 1e-6 }
    }
}

/// Gaussian site on one coordinate in natural parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub index: usize,
    pub bound: f64,
    pub side: Side,
    pub precision: f64,
    pub shift: f64,
}

/// Output of [`ep_condition`]: the approximate conditioned Gaussian plus
/// the site representation needed to condition correlated quantities.
#[derive(Clone, Debug)]
pub struct EpResult {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub sites: Vec<Site>,
    pub converged: bool,
    pub iterations: usize,
    pub dropped_sites: usize,
    conditioner: Conditioner,
}

impl EpResult {
    /// Pseudo-observation view of the constraints relative to the input
    /// block.
    pub fn conditioner(&self) -> &Conditioner {
        &self.conditioner
    }
}

/// The constraints as pseudo-observations of block coordinates: equalities
/// are noise-free, active EP sites carry Gaussian noise `1/precision`.
/// Conditioning any jointly Gaussian quantity on them reproduces the EP
/// result by linear-Gaussian algebra.
#[derive(Clone, Debug)]
pub struct Conditioner {
    indices: Vec<usize>,
    targets: DVector<f64>,
    chol: Option<Chol>,
    /// `(V_CC + D)⁻¹ (targets − μ_C)`.
    weights: DVector<f64>,
}

impl Conditioner {
    fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, obs: &[(usize, f64, f64)]) -> Result<Self> {
        let c = obs.len();
        let indices: Vec<usize> = obs.iter().map(|o| o.0).collect();
        let targets = DVector::from_iterator(c, obs.iter().map(|o| o.1));
        if c == 0 {
            return Ok(Conditioner { indices, targets, chol: None, weights: DVector::zeros(0) });
        }
        let mut m = DMatrix::zeros(c, c);
        for (a, oa) in obs.iter().enumerate() {
            for (b, ob) in obs.iter().enumerate() {
                m[(a, b)] = cov[(oa.0, ob.0)];
            }
            m[(a, a)] += oa.2;
        }
        let (chol, _) = jittered_cholesky(&m, max_diag(cov).max(1e-300))?;
        let resid = DVector::from_iterator(c, obs.iter().map(|o| o.1 - mean[o.0]));
        let weights = chol.solve(&resid);
        Ok(Conditioner { indices, targets, chol: Some(chol), weights })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Pseudo-observed values, aligned with [`Conditioner::indices`].
    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// `kᵀ (V_CC + D)⁻¹ k` for a cross-covariance `k` between an external
    /// quantity and the full block.
    pub fn variance_reduction(&self, cross: &[f64]) -> f64 {
        let Some(chol) = &self.chol else { return 0.0 };
        let k = DVector::from_iterator(self.indices.len(), self.indices.iter().map(|i| cross[*i]));
        let w = chol.l_dirty().solve_lower_triangular(&k).expect("positive diagonal");
        w.norm_squared()
    }

    /// Shift in the mean of an external quantity with block cross-covariance
    /// `cross`.
    pub fn mean_shift(&self, cross: &[f64]) -> f64 {
        self.indices.iter().zip(self.weights.iter()).map(|(i, w)| cross[*i] * w).sum()
    }
}

fn condition_equalities(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    eq: &[(usize, f64)],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if eq.is_empty() {
        return Ok((mean.clone(), cov.clone()));
    }
    let n = mean.len();
    let e = eq.len();
    let mut see = DMatrix::zeros(e, e);
    let mut sne = DMatrix::zeros(n, e);
    for (a, (ia, _)) in eq.iter().enumerate() {
        for (b, (ib, _)) in eq.iter().enumerate() {
            see[(a, b)] = cov[(*ia, *ib)];
        }
        for r in 0..n {
            sne[(r, a)] = cov[(r, *ia)];
        }
    }
    let (chol, _) = jittered_cholesky(&see, max_diag(cov).max(1e-300))?;
    let resid = DVector::from_iterator(e, eq.iter().map(|(i, v)| v - mean[*i]));
    let mut m = mean + &sne * chol.solve(&resid);
    let w = chol.l_dirty().solve_lower_triangular(&sne.transpose()).expect("positive diagonal");
    let mut c = cov - w.transpose() * w;
    symmetrize(&mut c);
    for (i, v) in eq {
        m[*i] = *v;
        for r in 0..n {
            c[(r, *i)] = 0.0;
            c[(*i, r)] = 0.0;
        }
    }
    Ok((m, c))
}

/// Recomputes the posterior from `(m1, v1)` and the current sites.
fn refresh(m1: &DVector<f64>, v1: &DMatrix<f64>, sites: &[Site]) -> (DVector<f64>, DMatrix<f64>) {
    let active: Vec<&Site> = sites.iter().filter(|s| s.precision > 0.0).collect();
    if active.is_empty() {
        return (m1.clone(), v1.clone());
    }
    let n = m1.len();
    let a = active.len();
    let sq: Vec<f64> = active.iter().map(|s| libm::sqrt(s.precision)).collect();
    let mut b = DMatrix::identity(a, a);
    let mut vs = DMatrix::zeros(n, a);
    for (p, sp) in active.iter().enumerate() {
        for (q, sq_q) in active.iter().enumerate() {
            b[(p, q)] += sq[p] * v1[(sp.index, sq_q.index)] * sq[q];
        }
        for r in 0..n {
            vs[(r, p)] = v1[(r, sp.index)] * sq[p];
        }
    }
    let chol = nalgebra::Cholesky::new(b).expect("I + S½VS½ is positive definite");
    let rhs = DVector::from_iterator(a, active.iter().enumerate().map(|(p, s)| s.shift / sq[p] - sq[p] * m1[s.index]));
    let mut mean = m1 + &vs * chol.solve(&rhs);
    let w = chol.l_dirty().solve_lower_triangular(&vs.transpose()).expect("positive diagonal");
    let mut cov = v1 - w.transpose() * w;
    symmetrize(&mut cov);
    for i in 0..n {
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
        if !mean[i].is_finite() {
            mean[i] = m1[i];
        }
    }
    (mean, cov)
}

/// Conditions the block on its constraints. Equalities are exact; the
/// first EP sweep is undamped, later sweeps mix new site parameters with
/// weight `cfg.damping`.
pub fn ep_condition(block: &ConstraintBlock, cfg: &EpConfig) -> Result<EpResult> {
    block.validate()?;
    let eq: Vec<(usize, f64)> = block
        .constraints
        .iter()
        .filter_map(|c| match c.kind {
            ConstraintKind::Equal(v) => Some((c.index, v)),
            _ => None,
        })
        .collect();
    let mut sites: Vec<Site> = block
        .constraints
        .iter()
        .filter_map(|c| match c.kind {
            ConstraintKind::LessEq(b) => Some(Site { index: c.index, bound: b, side: Side::Le, precision: 0.0, shift: 0.0 }),
            ConstraintKind::GreaterEq(b) => Some(Site { index: c.index, bound: b, side: Side::Ge, precision: 0.0, shift: 0.0 }),
            ConstraintKind::Equal(_) => None,
        })
        .collect();

    let (m1, v1) = condition_equalities(&block.mean, &block.cov, &eq)?;
    let scale = max_diag(&block.cov).max(1e-300);
    let mut mean = m1.clone();
    let mut cov = v1.clone();
    let mut failures = alloc::vec![0usize; sites.len()];
    let mut dropped = 0;
    let mut converged = sites.is_empty();
    let mut iterations = 0;

    while !converged && iterations < cfg.max_iters {
        iterations += 1;
        let damping = if iterations == 1 { 1.0 } else { cfg.damping.clamp(1e-3, 1.0) };
        let mut max_change: f64 = 0.0;
        for (si, site) in sites.iter_mut().enumerate() {
            let i = site.index;
            let var = cov[(i, i)];
            if !(var > 1e-14 * scale) {
                continue;
            }
            let cav_prec = 1.0 / var - site.precision;
            if !(cav_prec > 0.0) {
                continue;
            }
            let cav_var = 1.0 / cav_prec;
            let cav_mean = cav_var * (mean[i] / var - site.shift);
            let (m_hat, v_hat) = match truncated_moments(cav_mean, cav_var, site.bound, site.side) {
                Ok(mv) => {
                    failures[si] = 0;
                    mv
                }
                Err(Error::NegligibleMass) => {
                    failures[si] += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let new_prec = (1.0 / v_hat - cav_prec).max(0.0);
            let new_shift = m_hat / v_hat - cav_mean / cav_var;
            let prec = (1.0 - damping) * site.precision + damping * new_prec;
            let shift = (1.0 - damping) * site.shift + damping * new_shift;
            let d_prec = prec - site.precision;
            let d_shift = shift - site.shift;
            max_change = max_change.max((d_prec * var).abs()).max((d_shift * libm::sqrt(var)).abs());
            site.precision = prec;
            site.shift = shift;
            // Rank-one update of the running posterior.
            let denom = 1.0 + d_prec * var;
            let col: Vec<f64> = (0..mean.len()).map(|r| cov[(r, i)]).collect();
            let gain = (d_shift - d_prec * mean[i]) / denom;
            for r in 0..mean.len() {
                mean[r] += col[r] * gain;
                for c in 0..mean.len() {
                    cov[(r, c)] -= d_prec / denom * col[r] * col[c];
                }
            }
        }
        // Sites whose tilted mass keeps vanishing are dropped.
        let mut keep = Vec::with_capacity(sites.len());
        let mut keep_fail = Vec::with_capacity(sites.len());
        for (s, f) in sites.iter().zip(&failures) {
            if *f >= 2 {
                dropped += 1;
            } else {
                keep.push(*s);
                keep_fail.push(*f);
            }
        }
        let changed_sites = keep.len() != sites.len();
        sites = keep;
        failures = keep_fail;
        let (m, c) = refresh(&m1, &v1, &sites);
        mean = m;
        cov = c;
        if max_change < cfg.tol && !changed_sites && failures.iter().all(|f| *f == 0) {
            converged = true;
        }
    }

    let mut obs: Vec<(usize, f64, f64)> = eq.iter().map(|(i, v)| (*i, *v, 0.0)).collect();
    obs.extend(sites.iter().filter(|s| s.precision > 0.0).map(|s| (s.index, s.shift / s.precision, 1.0 / s.precision)));
    let conditioner = Conditioner::new(&block.mean, &block.cov, &obs)?;
    Ok(EpResult { mean, cov, sites, converged, iterations, dropped_sites: dropped, conditioner })
}
