//! Box-constrained quasi-Newton minimization (projected BFGS with an
//! Armijo backtracking search along the projection arc).

use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalOptions {
    pub max_iters: usize,
    /// Stop when the projected gradient norm falls below this.
    pub gtol: f64,
    /// Stop when a full iteration changes `x` by less than this (∞-norm).
    pub xtol: f64,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { max_iters: 200, gtol: 1e-8, xtol: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub projected_grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
}

/// Gradient with components pointing out of the box at active bounds zeroed.
pub fn projected_gradient(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((xi, gi), (l, h))| {
            if (*xi <= *l && *gi > 0.0) || (*xi >= *h && *gi < 0.0) {
                0.0
            } else {
                *gi
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` over `[lo, hi]`. The closure writes the gradient into its
/// second argument and returns the value.
pub fn minimize_box<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &LocalOptions) -> LocalResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; n];
    let mut fx = f(&x, &mut g);
    // Inverse Hessian approximation, row-major.
    let mut hinv = identity(n);
    let mut iters = 0;
    let mut converged = false;
    let mut g_new = vec![0.0; n];

    while iters < opts.max_iters {
        let pg = projected_gradient(&x, &g, lo, hi);
        if !fx.is_finite() || inf_norm(&pg) < opts.gtol {
            converged = fx.is_finite();
            break;
        }
        iters += 1;
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();
        let mut dir = vec![0.0; n];
        for i in 0..n {
            if !free[i] {
                continue;
            }
            let mut s = 0.0;
            for j in 0..n {
                if free[j] {
                    s -= hinv[i * n + j] * g[j];
                }
            }
            dir[i] = s;
        }
        let slope: f64 = dir.iter().zip(&g).map(|(d, gi)| d * gi).sum();
        if !(slope < 0.0) {
            hinv = identity(n);
            for i in 0..n {
                dir[i] = -pg[i];
            }
        }
        // Scale the very first step so it cannot leap across the whole box.
        let mut t = 1.0;
        if iters == 1 {
            let dn = inf_norm(&dir);
            let span = lo.iter().zip(hi).map(|(l, h)| h - l).filter(|w| *w > 0.0).fold(f64::INFINITY, f64::min);
            if span.is_finite() && dn > 0.25 * span {
                t = 0.25 * span / dn;
            }
        }
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            for i in 0..n {
                x_new[i] = x[i] + t * dir[i];
            }
            project(&mut x_new, lo, hi);
            f_new = f(&x_new, &mut g_new);
            let decrease: f64 = g.iter().zip(x_new.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if f_new.is_finite() && f_new <= fx + 1e-4 * decrease {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // Retry once from steepest descent before giving up.
            if hinv != identity(n) {
                hinv = identity(n);
                continue;
            }
            converged = inf_norm(&pg) < opts.gtol * 1e3;
            break;
        }
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let step = inf_norm(&s);
        x.copy_from_slice(&x_new);
        let f_old = fx;
        fx = f_new;
        g.copy_from_slice(&g_new);
        if sy > 1e-12 * inf_norm(&s).max(1e-300) * inf_norm(&y).max(1e-300) {
            bfgs_update(&mut hinv, &s, &y, sy);
        }
        if step < opts.xtol || (f_old - fx).abs() <= 1e-15 * fx.abs().max(1e-300) && step < 1e-10 {
            let pg = projected_gradient(&x, &g, lo, hi);
            converged = inf_norm(&pg) < opts.gtol * 1e3;
            break;
        }
    }
    let pg = projected_gradient(&x, &g, lo, hi);
    let pgn = libm::sqrt(pg.iter().map(|v| v * v).sum());
    LocalResult { x, f: fx, projected_grad_norm: pgn, iters, converged: converged || pgn < opts.gtol }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let mut hy = vec![0.0; n];
    for i in 0..n {
        hy[i] = (0..n).map(|j| h[i * n + j] * y[j]).sum();
    }
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

/// Central finite-difference gradient; steps shrink near the box bounds so
/// evaluations stay feasible.
pub fn fd_gradient<F: FnMut(&[f64]) -> f64>(f: &mut F, x: &[f64], lo: &[f64], hi: &[f64], step: f64, g: &mut [f64]) {
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let hp = step.min(hi[i] - x[i]);
        let hm = step.min(x[i] - lo[i]);
        if hp + hm <= 0.0 {
            g[i] = 0.0;
            continue;
        }
        xp[i] = x[i] + hp;
        let fp = f(&xp);
        xp[i] = x[i] - hm;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (hp + hm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_interior() {
        let f = |x: &[f64], g: &mut [f64]| {
            let (a, b) = (x[0], x[1]);
            g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
            g[1] = 200.0 * (b - a * a);
            (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
        };
        let r = minimize_box(f, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &LocalOptions { max_iters: 500, ..Default::default() });
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn bound_constrained_quadratic() {
        // Unconstrained minimum at (2, -3); box forces (1, -1).
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 2.0);
            g[1] = 2.0 * (x[1] + 3.0);
            (x[0] - 2.0).powi(2) + (x[1] + 3.0).powi(2)
        };
        let r = minimize_box(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &LocalOptions::default());
        assert_eq!(r.x, [1.0, -1.0]);
        assert!(r.converged);
    }

    #[test]
    fn pinned_coordinate_does_not_stall() {
        let f = |x: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (x[0] - 0.7);
            g[1] = 1.0;
            (x[0] - 0.7) * (x[0] - 0.7) + x[1]
        };
        let r = minimize_box(f, &[0.1, 0.0], &[0.0, 0.0], &[1.0, 0.0], &LocalOptions::default());
        assert!((r.x[0] - 0.7).abs() < 1e-6);
        assert_eq!(r.x[1], 0.0);
    }
}
