//! Exact Gaussian-process regression over value and derivative
//! observations.
//!
//! The prior mean is the average of the value observations; gradient and
//! Hessian observations are modelled around zero.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::kernel::{Deriv, KernelSpec, Radial};
use crate::linalg::{jittered_cholesky, symmetrize, Chol};
use crate::{Error, Result};

/// One evaluation record at an augmented location `(x, s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub location: Vec<f64>,
    pub kind: Deriv,
    pub value: f64,
    /// Overrides the kernel's homoscedastic noise when set.
    pub noise_sd: Option<f64>,
    pub cost: f64,
}

impl Observation {
    /// A value observation; the last coordinate is the fidelity `s`.
    pub fn new(location: Vec<f64>, kind: Deriv, value: f64) -> Result<Self> {
        if location.is_empty() || location.iter().any(|v| !v.is_finite()) || !value.is_finite() {
            return Err(Error::InvalidObservation("location and value must be finite"));
        }
        let s = location[location.len() - 1];
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::InvalidObservation("fidelity coordinate outside [0, 1]"));
        }
        if kind.max_index().is_some_and(|i| i >= location.len()) {
            return Err(Error::InvalidObservation("derivative index out of range"));
        }
        Ok(Observation { location, kind, value, noise_sd: None, cost: 0.0 })
    }

    pub fn value(location: Vec<f64>, value: f64) -> Result<Self> {
        Self::new(location, Deriv::Value, value)
    }

    pub fn with_noise(mut self, noise_sd: f64) -> Self {
        self.noise_sd = Some(noise_sd);
        self
    }

    pub fn with_cost(mut self, cost: f64) -> Self {
        self.cost = cost;
        self
    }
}

struct Factor {
    chol: Chol,
    alpha: DVector<f64>,
    offset: f64,
    jitter: f64,
    lml: f64,
}

fn factorize(data: &[Observation], spec: &KernelSpec) -> Result<Factor> {
    spec.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    let d = spec.dim();
    for o in data {
        if o.location.len() != d || o.location.iter().any(|v| !v.is_finite()) || !o.value.is_finite() {
            return Err(Error::InvalidObservation("location dimension or value invalid"));
        }
        if o.kind.max_index().is_some_and(|i| i >= d) {
            return Err(Error::InvalidObservation("derivative index out of range"));
        }
    }
    let n = data.len();
    let (sum, count) = data
        .iter()
        .filter(|o| o.kind == Deriv::Value)
        .fold((0.0, 0usize), |(s, c), o| (s + o.value, c + 1));
    let offset = if count > 0 { sum / count as f64 } else { 0.0 };

    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        let (xi, ki) = (&data[i].location, data[i].kind);
        for j in 0..=i {
            let (xj, kj) = (&data[j].location, data[j].kind);
            spec.check_pair(xi, ki, xj, kj)?;
            let v = spec.eval_unchecked(xi, ki, xj, kj);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
        let sd = data[i].noise_sd.unwrap_or(spec.noise_sd);
        gram[(i, i)] += sd * sd;
    }
    let (chol, jitter) = jittered_cholesky(&gram, spec.amplitude)?;
    let targets = DVector::from_iterator(
        n,
        data.iter().map(|o| if o.kind == Deriv::Value { o.value - offset } else { o.value }),
    );
    let alpha = chol.solve(&targets);
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| libm::log(*v)).sum();
    let lml = -0.5 * targets.dot(&alpha) - log_det - 0.5 * n as f64 * libm::log(2.0 * PI);
    Ok(Factor { chol, alpha, offset, jitter, lml })
}

/// Gaussian log marginal likelihood of `data` under `spec`.
pub fn log_marginal_likelihood(data: &[Observation], spec: &KernelSpec) -> Result<f64> {
    Ok(factorize(data, spec)?.lml)
}

/// Posterior for one kernel specification; immutable after [`GpState::fit`].
#[derive(Clone, Debug)]
pub struct GpState {
    spec: KernelSpec,
    data: Vec<Observation>,
    chol: Chol,
    alpha: DVector<f64>,
    offset: f64,
    jitter: f64,
    lml: f64,
}

impl GpState {
    pub fn fit(data: Vec<Observation>, spec: KernelSpec) -> Result<Self> {
        let f = factorize(&data, &spec)?;
        Ok(GpState { spec, data, chol: f.chol, alpha: f.alpha, offset: f.offset, jitter: f.jitter, lml: f.lml })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn data(&self) -> &[Observation] {
        &self.data
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Constant prior mean of the value process.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Noise variance of a new value observation.
    pub fn noise_var(&self) -> f64 {
        self.spec.noise_sd * self.spec.noise_sd
    }

    fn prior_mean(&self, kind: Deriv) -> f64 {
        if kind == Deriv::Value {
            self.offset
        } else {
            0.0
        }
    }

    /// `k(X, q)` for one query.
    pub(crate) fn cross(&self, loc: &[f64], kind: Deriv) -> DVector<f64> {
        let mut v = DVector::zeros(self.data.len());
        if kind == Deriv::Value {
            for (j, o) in self.data.iter().enumerate() {
                v[j] = if o.kind == Deriv::Value {
                    self.spec.value_cov(loc, &o.location)
                } else {
                    Radial::new(&self.spec, loc, &o.location).cov(kind, o.kind)
                };
            }
        } else {
            for (j, o) in self.data.iter().enumerate() {
                v[j] = Radial::new(&self.spec, loc, &o.location).cov(kind, o.kind);
            }
        }
        v
    }

    fn check_queries(&self, queries: &[(&[f64], Deriv)]) -> Result<()> {
        for (loc, kind) in queries {
            if loc.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidObservation("query location must be finite"));
            }
            for o in &self.data {
                self.spec.check_pair(loc, *kind, &o.location, o.kind)?;
            }
            for (loc2, kind2) in queries {
                self.spec.check_pair(loc, *kind, loc2, *kind2)?;
            }
        }
        Ok(())
    }

    /// `L⁻¹ K(X, Q)`, the whitened cross-covariance with the training data.
    pub(crate) fn whitened_cross(&self, queries: &[(&[f64], Deriv)]) -> DMatrix<f64> {
        let n = self.data.len();
        let mut k = DMatrix::zeros(n, queries.len());
        for (c, (loc, kind)) in queries.iter().enumerate() {
            k.set_column(c, &self.cross(loc, *kind));
        }
        self.chol.l_dirty().solve_lower_triangular(&k).expect("cholesky factor has a positive diagonal")
    }

    pub(crate) fn whiten(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.l_dirty().solve_lower_triangular(v).expect("cholesky factor has a positive diagonal")
    }

    pub(crate) fn prior_cov(&self, queries: &[(&[f64], Deriv)]) -> DMatrix<f64> {
        let q = queries.len();
        let mut m = DMatrix::zeros(q, q);
        for i in 0..q {
            for j in 0..=i {
                let v = self.spec.eval_unchecked(queries[i].0, queries[i].1, queries[j].0, queries[j].1);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Joint posterior mean and covariance of the queried quantities.
    pub fn posterior(&self, queries: &[(&[f64], Deriv)]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_queries(queries)?;
        Ok(self.posterior_unchecked(queries))
    }

    pub(crate) fn posterior_unchecked(&self, queries: &[(&[f64], Deriv)]) -> (DVector<f64>, DMatrix<f64>) {
        let q = queries.len();
        let w = self.whitened_cross(queries);
        let mut mean = DVector::zeros(q);
        for (i, (loc, kind)) in queries.iter().enumerate() {
            mean[i] = self.prior_mean(*kind) + self.cross(loc, *kind).dot(&self.alpha);
        }
        let mut cov = self.prior_cov(queries);
        cov -= w.transpose() * &w;
        symmetrize(&mut cov);
        (mean, cov)
    }

    /// Posterior mean and variance of the latent value at `x`.
    pub fn predict_value(&self, x: &[f64]) -> (f64, f64) {
        let k = self.cross(x, Deriv::Value);
        let mean = self.offset + k.dot(&self.alpha);
        let v = self.whiten(&k);
        let var = (self.spec.amplitude - v.norm_squared()).max(0.0);
        (mean, var)
    }

    pub fn mean_value(&self, x: &[f64]) -> f64 {
        self.offset + self.cross(x, Deriv::Value).dot(&self.alpha)
    }

    /// Posterior mean value and its gradient in the first `grad_dims`
    /// coordinates.
    pub fn mean_value_grad(&self, x: &[f64], grad_dims: usize, grad: &mut [f64]) -> f64 {
        let mut value = self.offset;
        grad[..grad_dims].iter_mut().for_each(|g| *g = 0.0);
        for (o, a) in self.data.iter().zip(self.alpha.iter()) {
            let r = Radial::new(&self.spec, x, &o.location);
            if o.kind == Deriv::Value {
                value += a * r.value();
                for (i, g) in grad[..grad_dims].iter_mut().enumerate() {
                    *g += a * r.d1(i);
                }
            } else {
                value += a * r.cov(Deriv::Value, o.kind);
                for (i, g) in grad[..grad_dims].iter_mut().enumerate() {
                    *g += a * r.cov(Deriv::Grad(i), o.kind);
                }
            }
        }
        value
    }

    /// Posterior mean Hessian over the first `dims` coordinates.
    pub fn mean_hessian(&self, x: &[f64], dims: usize) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(dims, dims);
        for (o, a) in self.data.iter().zip(self.alpha.iter()) {
            let r = Radial::new(&self.spec, x, &o.location);
            for i in 0..dims {
                for j in 0..=i {
                    let v = if o.kind == Deriv::Value { r.d2(i, j) } else { r.cov(Deriv::hess(j, i), o.kind) };
                    h[(i, j)] += a * v;
                }
            }
        }
        for i in 0..dims {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }
}
