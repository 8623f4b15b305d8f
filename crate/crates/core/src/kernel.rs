//! Matérn 5/2 kernel over the augmented `(x, s)` space with covariances
//! between values, gradient components and Hessian entries.
//!
//! With `τ = a − b`, `r² = Σ τᵢ²/hᵢ²` and `wᵢ = τᵢ/hᵢ²`, every derivative of
//! the stationary kernel `K(τ)` is a sum over ways of splitting the index
//! list into singletons (each contributing `wᵢ`) and pairs (each
//! contributing `δᵢⱼ/hᵢ²`). A term with `m` blocks is scaled by the radial
//! function `G_m`, where `G_0 = k(r)` and `G_{m+1} = G_m'(r)/r`.

use alloc::vec::Vec;

use crate::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;

/// Largest supported augmented dimension.
pub const MAX_DIM: usize = 16;

/// What a covariance refers to at one location: the function value, one
/// gradient component, or one Hessian entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Deriv {
    Value,
    Grad(usize),
    /// Hessian entry with `i ≤ j`; build it with [`Deriv::hess`].
    Hess(usize, usize),
}

impl Deriv {
    pub fn hess(i: usize, j: usize) -> Self {
        if i <= j {
            Deriv::Hess(i, j)
        } else {
            Deriv::Hess(j, i)
        }
    }

    pub fn order(&self) -> usize {
        match self {
            Deriv::Value => 0,
            Deriv::Grad(_) => 1,
            Deriv::Hess(..) => 2,
        }
    }

    fn indices(&self) -> ([usize; 2], usize) {
        match *self {
            Deriv::Value => ([0, 0], 0),
            Deriv::Grad(i) => ([i, 0], 1),
            Deriv::Hess(i, j) => ([i, j], 2),
        }
    }

    pub(crate) fn max_index(&self) -> Option<usize> {
        match *self {
            Deriv::Value => None,
            Deriv::Grad(i) => Some(i),
            Deriv::Hess(i, j) => Some(i.max(j)),
        }
    }
}

/// Amplitude, per-dimension lengthscales (the last is the fidelity axis)
/// and homoscedastic noise standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub amplitude: f64,
    pub lengthscales: Vec<f64>,
    pub noise_sd: f64,
}

impl KernelSpec {
    pub fn new(amplitude: f64, lengthscales: Vec<f64>, noise_sd: f64) -> Result<Self> {
        let spec = KernelSpec { amplitude, lengthscales, noise_sd };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidSpec("amplitude must be positive"));
        }
        if self.lengthscales.is_empty() || self.lengthscales.len() > MAX_DIM {
            return Err(Error::InvalidSpec("between 1 and 16 lengthscales are required"));
        }
        if self.lengthscales.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
            return Err(Error::InvalidSpec("lengthscales must be positive"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidSpec("noise_sd must be non-negative"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub(crate) fn scaled_r(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), h) in a.iter().zip(b).zip(&self.lengthscales) {
            let t = (x - y) / h;
            r2 += t * t;
        }
        libm::sqrt(r2)
    }

    /// Value–value covariance; no validation.
    pub(crate) fn value_cov(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.scaled_r(a, b);
        let sr = SQRT5 * r;
        self.amplitude * (1.0 + sr + sr * sr / 3.0) * libm::exp(-sr)
    }

    /// `cov(D_a f(a), D_b f(b))`.
    pub fn eval(&self, a: &[f64], da: Deriv, b: &[f64], db: Deriv) -> Result<f64> {
        self.validate()?;
        self.check_pair(a, da, b, db)?;
        Ok(self.eval_unchecked(a, da, b, db))
    }

    /// Rejects pairs outside the supported set and out-of-range indices.
    /// Hessian–Hessian covariances are only defined at coincident locations.
    pub(crate) fn check_pair(&self, a: &[f64], da: Deriv, b: &[f64], db: Deriv) -> Result<()> {
        let d = self.dim();
        if a.len() != d || b.len() != d {
            return Err(Error::InvalidSpec("location dimension does not match lengthscales"));
        }
        for k in [da, db] {
            if k.max_index().is_some_and(|i| i >= d) {
                return Err(Error::UnsupportedDerivative { a: da, b: db });
            }
        }
        if da.order() == 2 && db.order() == 2 && a != b {
            return Err(Error::UnsupportedDerivative { a: da, b: db });
        }
        Ok(())
    }

    pub(crate) fn eval_unchecked(&self, a: &[f64], da: Deriv, b: &[f64], db: Deriv) -> f64 {
        if da == Deriv::Value && db == Deriv::Value {
            return self.value_cov(a, b);
        }
        let radial = Radial::new(self, a, b);
        radial.cov(da, db)
    }
}

/// Shared quantities for every derivative covariance between two fixed
/// locations.
pub(crate) struct Radial<'a> {
    spec: &'a KernelSpec,
    tau: [f64; MAX_DIM],
    r: f64,
    g: [f64; 5],
}

impl<'a> Radial<'a> {
    pub(crate) fn new(spec: &'a KernelSpec, a: &[f64], b: &[f64]) -> Self {
        let mut tau = [0.0; MAX_DIM];
        let mut r2 = 0.0;
        for (i, ((x, y), h)) in a.iter().zip(b).zip(&spec.lengthscales).enumerate() {
            tau[i] = x - y;
            let t = tau[i] / h;
            r2 += t * t;
        }
        let r = libm::sqrt(r2);
        let amp = spec.amplitude;
        let e = libm::exp(-SQRT5 * r);
        let sr = SQRT5 * r;
        let c3 = 25.0 * SQRT5 / 3.0 * amp;
        let (g3, g4) = if r > 0.0 {
            (-c3 * e / r, c3 * e * (1.0 + sr) / (r * r * r))
        } else {
            (0.0, 0.0)
        };
        let g = [
            amp * (1.0 + sr + sr * sr / 3.0) * e,
            -5.0 / 3.0 * amp * (1.0 + sr) * e,
            25.0 / 3.0 * amp * e,
            g3,
            g4,
        ];
        Radial { spec, tau, r, g }
    }

    pub(crate) fn value(&self) -> f64 {
        self.g[0]
    }

    /// `G_1·w_i`, the derivative of the kernel in `a_i`.
    pub(crate) fn d1(&self, i: usize) -> f64 {
        self.g[1] * self.w(i)
    }

    /// Second derivative of the kernel in `a_i, a_j`.
    pub(crate) fn d2(&self, i: usize, j: usize) -> f64 {
        let mut v = self.g[2] * self.w(i) * self.w(j);
        if i == j {
            v += self.g[1] * self.pair(i);
        }
        v
    }

    fn w(&self, i: usize) -> f64 {
        let h = self.spec.lengthscales[i];
        self.tau[i] / (h * h)
    }

    fn pair(&self, i: usize) -> f64 {
        let h = self.spec.lengthscales[i];
        1.0 / (h * h)
    }

    pub(crate) fn cov(&self, da: Deriv, db: Deriv) -> f64 {
        let (ia, na) = da.indices();
        let (ib, nb) = db.indices();
        let mut idx = [0usize; 4];
        idx[..na].copy_from_slice(&ia[..na]);
        idx[na..na + nb].copy_from_slice(&ib[..nb]);
        // Derivatives in b flip sign through τ = a − b.
        let sign = if nb % 2 == 0 { 1.0 } else { -1.0 };
        sign * self.derivative(&idx[..na + nb])
    }

    /// `∂^idx K(τ)` by summing over singleton/pair splittings.
    fn derivative(&self, idx: &[usize]) -> f64 {
        let mut coeff = [0.0f64; 5];
        self.split(idx, 0, 1.0, &mut coeff);
        let mut total = 0.0;
        for (m, c) in coeff.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            // Terms with three or more blocks carry at least two singletons
            // and vanish at r = 0.
            if m >= 3 && self.r == 0.0 {
                continue;
            }
            total += self.g[m] * c;
        }
        total
    }

    fn split(&self, rest: &[usize], blocks: usize, prod: f64, coeff: &mut [f64; 5]) {
        let Some((&p, tail)) = rest.split_first() else {
            coeff[blocks] += prod;
            return;
        };
        let wp = self.w(p);
        if wp != 0.0 {
            self.split(tail, blocks + 1, prod * wp, coeff);
        }
        for k in 0..tail.len() {
            if tail[k] != p {
                continue;
            }
            let mut remaining = [0usize; 4];
            let mut n = 0;
            for (j, &q) in tail.iter().enumerate() {
                if j != k {
                    remaining[n] = q;
                    n += 1;
                }
            }
            self.split(&remaining[..n], blocks + 1, prod * self.pair(p), coeff);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn spec2() -> KernelSpec {
        KernelSpec::new(1.7, vec![0.6, 1.3], 0.0).unwrap()
    }

    #[test]
    fn value_at_zero_distance_is_amplitude() {
        let s = spec2();
        let a = [0.2, -0.4];
        assert!((s.eval(&a, Deriv::Value, &a, Deriv::Value).unwrap() - 1.7).abs() < 1e-15);
    }

    #[test]
    fn unit_distance_value() {
        let s = KernelSpec::new(1.0, vec![1.0], 0.0).unwrap();
        let v = s.eval(&[0.0], Deriv::Value, &[1.0], Deriv::Value).unwrap();
        let expect = (1.0 + SQRT5 + 5.0 / 3.0) * libm::exp(-SQRT5);
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.524_00).abs() < 1e-5);
    }

    #[test]
    fn gradient_value_vanishes_at_coincidence() {
        let s = spec2();
        let a = [0.1, 0.9];
        assert_eq!(s.eval(&a, Deriv::Grad(0), &a, Deriv::Value).unwrap(), 0.0);
        assert_eq!(s.eval(&a, Deriv::Value, &a, Deriv::Grad(1)).unwrap(), 0.0);
    }

    #[test]
    fn coincident_grad_grad_and_hess_hess() {
        let s = spec2();
        let a = [0.3, 0.3];
        let h0 = 0.6f64 * 0.6;
        // -∂²K(0) along axis 0 = -G1(0)/h² = (5/3)A/h².
        let gg = s.eval(&a, Deriv::Grad(0), &a, Deriv::Grad(0)).unwrap();
        assert!((gg - 5.0 / 3.0 * 1.7 / h0).abs() < 1e-12);
        // ∂⁴K(0) along one axis = 3·G2(0)/h⁴ = 25·A/h⁴.
        let hh = s.eval(&a, Deriv::Hess(0, 0), &a, Deriv::Hess(0, 0)).unwrap();
        assert!((hh - 25.0 * 1.7 / (h0 * h0)).abs() < 1e-9);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let bad = KernelSpec { amplitude: 1.0, lengthscales: vec![1.0, 0.0], noise_sd: 0.0 };
        assert!(matches!(
            bad.eval(&[0.0, 0.0], Deriv::Value, &[0.0, 0.0], Deriv::Value),
            Err(Error::InvalidSpec(_))
        ));
        let s = spec2();
        assert!(matches!(
            s.eval(&[0.0, 0.0], Deriv::Hess(0, 1), &[0.1, 0.0], Deriv::Hess(0, 0)),
            Err(Error::UnsupportedDerivative { .. })
        ));
        assert!(matches!(
            s.eval(&[0.0, 0.0], Deriv::Grad(2), &[0.1, 0.0], Deriv::Value),
            Err(Error::UnsupportedDerivative { .. })
        ));
    }
}
