//! Benchmark objectives with a fidelity axis, and simulated evaluation
//! costs.
//!
//! Every objective evaluates to the textbook function at `s = 0`. Analytic
//! functions get their cheap approximations from a smooth additive shift
//! that grows linearly in `s`; Matérn draws are defined jointly over
//! `(x, s)`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::domain::{Domain, Halton};
use crate::kernel::{KernelSpec, Radial};
use crate::linalg::jittered_cholesky;
use crate::local::{minimize_box, LocalOptions};
use crate::{Error, Result};

pub fn branin(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let u = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
    u * u + 10.0 * (1.0 - t) * libm::cos(x[0]) + 10.0
}

const H3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const H3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const H_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

fn hartmann<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> f64 {
    -(0..4)
        .map(|i| {
            let inner: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]) * (x[j] - p[i][j])).sum();
            H_ALPHA[i] * libm::exp(-inner)
        })
        .sum::<f64>()
}

pub fn hartmann3(x: &[f64]) -> f64 {
    hartmann(x, &H3_A, &H3_P)
}

pub fn hartmann6(x: &[f64]) -> f64 {
    hartmann(x, &H6_A, &H6_P)
}

pub const BRANIN_MIN: f64 = 0.397_887;
pub const HARTMANN3_MIN: f64 = -3.862_78;
pub const HARTMANN6_MIN: f64 = -3.322_37;

/// A kernel interpolant `Σ αᵢ k(z, zᵢ)` over fixed centres. Used for the
/// realized Matérn draws and the shift fields.
#[derive(Clone, Debug)]
pub struct KernelField {
    spec: KernelSpec,
    centres: Vec<Vec<f64>>,
    alpha: DVector<f64>,
}

impl KernelField {
    /// Draws exact joint values at `centres` from a zero-mean process with
    /// kernel `spec`, then interpolates them.
    pub fn draw(spec: KernelSpec, centres: Vec<Vec<f64>>, seed: u64) -> Result<Self> {
        let n = centres.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = spec.value_cov(&centres[i], &centres[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let (chol, _) = jittered_cholesky(&k, spec.amplitude)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        // f = L z and K⁻¹ f = L⁻ᵀ z.
        let alpha = chol.l_dirty().tr_solve_lower_triangular(&z).ok_or(Error::IllConditioned { jitter: 0.0 })?;
        Ok(KernelField { spec, centres, alpha })
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.centres.iter().zip(self.alpha.iter()).map(|(c, a)| a * self.spec.value_cov(z, c)).sum()
    }

    /// Value and gradient in the first `dims` coordinates.
    pub fn value_grad(&self, z: &[f64], dims: usize, grad: &mut [f64]) -> f64 {
        grad[..dims].iter_mut().for_each(|g| *g = 0.0);
        let mut v = 0.0;
        for (c, a) in self.centres.iter().zip(self.alpha.iter()) {
            let r = Radial::new(&self.spec, z, c);
            v += a * r.value();
            for (i, g) in grad[..dims].iter_mut().enumerate() {
                *g += a * r.d1(i);
            }
        }
        v
    }

    fn scale(&mut self, f: f64) {
        self.alpha *= f;
    }
}

/// A Matérn 5/2 draw over `[-1, 1]^d × [0, 1]` with lengthscale `lengthscale`
/// in `x` and `l_ev` along the fidelity axis, realized on a lattice and
/// interpolated.
#[derive(Clone, Debug)]
pub struct GpDraw {
    field: KernelField,
    d: usize,
    f_star: f64,
    x_star: Vec<f64>,
}

impl GpDraw {
    pub fn new(d: usize, lengthscale: f64, l_ev: f64, seed: u64) -> Result<Self> {
        if d == 0 || !(lengthscale > 0.0) || !(l_ev > 0.0) {
            return Err(Error::Config("gp-draw needs d ≥ 1 and positive lengthscales".into()));
        }
        let per_dim = (libm::ceil(2.0 / (0.5 * lengthscale)) as usize + 1).max(2);
        let s_levels = (libm::ceil(1.0 / (0.5 * l_ev)) as usize + 1).max(2);
        let mut centres = Vec::new();
        let total = per_dim.pow(d as u32);
        for s_i in 0..s_levels {
            let s = s_i as f64 / (s_levels - 1) as f64;
            for flat in 0..total {
                let mut p = Vec::with_capacity(d + 1);
                let mut rem = flat;
                for _ in 0..d {
                    p.push(-1.0 + 2.0 * (rem % per_dim) as f64 / (per_dim - 1) as f64);
                    rem /= per_dim;
                }
                p.push(s);
                centres.push(p);
            }
        }
        let mut ls = vec![lengthscale; d];
        ls.push(l_ev);
        let spec = KernelSpec::new(1.0, ls, 0.0)?;
        let field = KernelField::draw(spec, centres, seed)?;
        let mut draw = GpDraw { field, d, f_star: 0.0, x_star: vec![0.0; d] };
        let (x, f) = draw.search_minimum();
        draw.f_star = f;
        draw.x_star = x;
        Ok(draw)
    }

    pub fn eval(&self, x: &[f64], s: f64) -> f64 {
        let mut z = x.to_vec();
        z.push(s);
        self.field.value(&z)
    }

    fn search_minimum(&self) -> (Vec<f64>, f64) {
        let dom = Domain::new(vec![-1.0; self.d], vec![1.0; self.d]).expect("valid box");
        let mut pts: Vec<(f64, Vec<f64>)> = Halton::new(self.d)
            .take(2000 * self.d)
            .map(|u| {
                let x = dom.from_unit(&u);
                (self.eval(&x, 0.0), x)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut best = pts[0].clone();
        let opts = LocalOptions { max_iters: 300, gtol: 1e-10, xtol: 1e-14 };
        let mut z = vec![0.0; self.d + 1];
        for (_, x0) in pts.iter().take(10) {
            let res = minimize_box(
                |x, g| {
                    z[..self.d].copy_from_slice(x);
                    z[self.d] = 0.0;
                    self.field.value_grad(&z, self.d, g)
                },
                x0,
                dom.lo(),
                dom.hi(),
                &opts,
            );
            if res.f < best.0 {
                best = (res.f, res.x);
            }
        }
        (best.1, best.0)
    }

    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }
}

#[derive(Clone, Debug)]
pub enum BaseFunction {
    Branin,
    Hartmann3,
    Hartmann6,
    GpDraw(GpDraw),
}

impl BaseFunction {
    pub fn domain(&self) -> Domain {
        match self {
            BaseFunction::Branin => Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).expect("valid box"),
            BaseFunction::Hartmann3 => Domain::unit(3),
            BaseFunction::Hartmann6 => Domain::unit(6),
            BaseFunction::GpDraw(g) => Domain::new(vec![-1.0; g.d], vec![1.0; g.d]).expect("valid box"),
        }
    }

    pub fn f_star(&self) -> f64 {
        match self {
            BaseFunction::Branin => BRANIN_MIN,
            BaseFunction::Hartmann3 => HARTMANN3_MIN,
            BaseFunction::Hartmann6 => HARTMANN6_MIN,
            BaseFunction::GpDraw(g) => g.f_star(),
        }
    }

    /// Approximate spread of values over the box, used to size shifts.
    pub fn range(&self) -> f64 {
        match self {
            BaseFunction::Branin => 308.129 - BRANIN_MIN,
            BaseFunction::Hartmann3 => -HARTMANN3_MIN,
            BaseFunction::Hartmann6 => -HARTMANN6_MIN,
            BaseFunction::GpDraw(_) => 4.0,
        }
    }

    fn eval(&self, x: &[f64], s: f64) -> f64 {
        match self {
            BaseFunction::Branin => branin(x),
            BaseFunction::Hartmann3 => hartmann3(x),
            BaseFunction::Hartmann6 => hartmann6(x),
            BaseFunction::GpDraw(g) => g.eval(x, s),
        }
    }
}

/// `y(x, s) = f(x) + scale·s·u(x)` with `u` a smooth unit-RMS field.
#[derive(Clone, Debug)]
pub struct LinearShift {
    pub scale: f64,
    field: KernelField,
    domain: Domain,
}

impl LinearShift {
    /// `u` is a Matérn 5/2 draw with lengthscale equal to the box width,
    /// realized at `20·d` low-discrepancy points and rescaled to unit RMS
    /// there.
    pub fn new(domain: &Domain, scale: f64, seed: u64) -> Result<Self> {
        let d = domain.dim();
        let centres: Vec<Vec<f64>> = Halton::new(d).take(20 * d).collect();
        let spec = KernelSpec::new(1.0, vec![1.0; d], 0.0)?;
        let mut field = KernelField::draw(spec, centres.clone(), seed)?;
        let rms = libm::sqrt(centres.iter().map(|c| { let v = field.value(c); v * v }).sum::<f64>() / centres.len() as f64);
        if rms > 0.0 {
            field.scale(1.0 / rms);
        }
        Ok(LinearShift { scale, field, domain: domain.clone() })
    }

    pub fn direction(&self, x: &[f64]) -> f64 {
        self.field.value(&self.domain.to_unit(x))
    }
}

/// Simulated evaluation cost in seconds as a function of fidelity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CostCurve {
    /// `scale·exp(−l_c·s)`.
    Exponential { l_c: f64, scale: f64 },
    /// `min + (max − min)(1 − s)²`.
    Quadratic { min: f64, max: f64 },
    Constant(f64),
}

impl CostCurve {
    pub fn cost(&self, s: f64) -> f64 {
        match *self {
            CostCurve::Exponential { l_c, scale } => scale * libm::exp(-l_c * s),
            CostCurve::Quadratic { min, max } => min + (max - min) * (1.0 - s) * (1.0 - s),
            CostCurve::Constant(c) => c,
        }
    }
}

/// An objective, its optional fidelity shift and its cost curve.
#[derive(Clone, Debug)]
pub struct Benchmark {
    pub base: BaseFunction,
    pub shift: Option<LinearShift>,
    pub cost: CostCurve,
    domain: Domain,
}

impl Benchmark {
    pub fn new(base: BaseFunction, shift: Option<LinearShift>, cost: CostCurve) -> Self {
        let domain = base.domain();
        Benchmark { base, shift, cost, domain }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn f_star(&self) -> f64 {
        self.base.f_star()
    }

    /// Objective value and simulated cost at `(x, s)`.
    pub fn evaluate(&self, x: &[f64], s: f64) -> Result<(f64, f64)> {
        if x.len() != self.domain.dim() || !self.domain.contains(x) {
            return Err(Error::Domain("point outside the objective's box"));
        }
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Domain("fidelity must lie in [0, 1]"));
        }
        let mut y = self.base.eval(x, s);
        if let Some(shift) = &self.shift {
            if s != 0.0 {
                y += shift.scale * s * shift.direction(x);
            }
        }
        Ok((y, self.cost.cost(s)))
    }

    /// The uncorrupted objective.
    pub fn true_value(&self, x: &[f64]) -> f64 {
        self.base.eval(x, 0.0)
    }
}
