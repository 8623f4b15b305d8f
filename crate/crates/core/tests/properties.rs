//! Numerical properties checked against independent references: finite
//! differences, closed-form Gaussian conditioning, analytic truncated-normal
//! moments and sampling moments.

use envpes_core::cost::{fit_overhead_map, remaining_steps, OverheadModel};
use envpes_core::domain::Domain;
use envpes_core::ep::{ep_condition, Constraint, ConstraintBlock, ConstraintKind, EpConfig};
use envpes_core::kernel::{Deriv, KernelSpec};
use envpes_core::minimizer::{compute_weights, draw_support, LocalMinCandidate, MixtureComponent};
use envpes_core::normal::{truncated_moments, Side};
use envpes_core::slice::{slice_sample, SliceConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec() -> KernelSpec {
    KernelSpec::new(1.7, vec![0.4, 0.9, 0.6], 0.0).unwrap()
}

/// Central difference of `f` in coordinate `i` of `a`.
fn fd(f: impl Fn(&[f64]) -> f64, a: &[f64], i: usize, h: f64) -> f64 {
    let mut p = a.to_vec();
    let mut m = a.to_vec();
    p[i] += h;
    m[i] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

fn close(analytic: f64, numeric: f64, scale: f64) -> bool {
    (analytic - numeric).abs() <= 1e-4 * analytic.abs().max(1e-3 * scale)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn derivative_covariances_match_differences(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        i in 0usize..3, j in 0usize..3, k in 0usize..3,
    ) {
        let s = spec();
        prop_assume!(a.iter().zip(&b).zip(&s.lengthscales).map(|((x, y), h)| ((x - y) / h).powi(2)).sum::<f64>() > 0.05);
        let amp = s.amplitude;
        let h = 1e-5;
        let ev = |x: &[f64], da: Deriv, db: Deriv| s.eval(x, da, &b, db).unwrap();

        let g = ev(&a, Deriv::Grad(i), Deriv::Value);
        prop_assert!(close(g, fd(|x| ev(x, Deriv::Value, Deriv::Value), &a, i, h), amp));

        let gg = ev(&a, Deriv::Grad(i), Deriv::Grad(k));
        prop_assert!(close(gg, fd(|x| ev(x, Deriv::Value, Deriv::Grad(k)), &a, i, h), amp));

        let hv = ev(&a, Deriv::hess(i, j), Deriv::Value);
        prop_assert!(close(hv, fd(|x| ev(x, Deriv::Grad(i), Deriv::Value), &a, j, h), amp));

        let hg = ev(&a, Deriv::hess(i, j), Deriv::Grad(k));
        prop_assert!(close(hg, fd(|x| ev(x, Deriv::Grad(i), Deriv::Grad(k)), &a, j, h), amp));

        let vh = ev(&a, Deriv::Value, Deriv::hess(i, j));
        prop_assert!(close(vh, hv, amp) || (vh - hv).abs() < 1e-12);
    }

    #[test]
    fn win_weights_normalize_and_favour_the_lowest_mean(
        cands in prop::collection::vec((-5.0f64..5.0, 0.0f64..4.0), 1..12),
    ) {
        let cs: Vec<LocalMinCandidate> = cands
            .iter()
            .map(|&(mean, variance)| LocalMinCandidate {
                x: vec![0.0],
                mean,
                variance,
                hessian: DMatrix::identity(1, 1),
                grad_cov: DMatrix::identity(1, 1),
            })
            .collect();
        let w = compute_weights(&cs);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lowest = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        let top = w.iter().copied().fold(0.0, f64::max);
        for (c, wi) in cands.iter().zip(&w) {
            if *wi == top {
                prop_assert_eq!(c.0, lowest);
            }
        }
    }
}

fn random_gaussian(n: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
    let cov = &a * a.transpose() + DMatrix::identity(n, n) * 0.1;
    let mean = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
    (mean, cov)
}

#[test]
fn equality_conditioning_matches_schur_complement() {
    for seed in 0..20 {
        let (mean, cov) = random_gaussian(5, seed);
        let obs = [(1usize, 0.3), (3usize, -0.7)];
        let block = ConstraintBlock {
            mean: mean.clone(),
            cov: cov.clone(),
            constraints: obs.iter().map(|&(index, v)| Constraint { index, kind: ConstraintKind::Equal(v) }).collect(),
        };
        let r = ep_condition(&block, &EpConfig::default()).unwrap();
        let o: Vec<usize> = obs.iter().map(|p| p.0).collect();
        let koo = DMatrix::from_fn(2, 2, |i, j| cov[(o[i], o[j])]);
        let kxo = DMatrix::from_fn(5, 2, |i, j| cov[(i, o[j])]);
        let resid = DVector::from_fn(2, |i, _| obs[i].1 - mean[o[i]]);
        let inv = koo.try_inverse().unwrap();
        let want_mean = &mean + &kxo * &inv * resid;
        let want_cov = &cov - &kxo * &inv * kxo.transpose();
        assert!((r.mean.clone() - want_mean).amax() < 1e-8, "seed {seed}");
        assert!((r.cov.clone() - want_cov).amax() < 1e-8, "seed {seed}");
    }
}

#[test]
fn single_site_matches_truncated_normal() {
    let cases = [
        (0.4, 2.0, 1.0, Side::Ge),
        (0.0, 1.0, 0.0, Side::Le),
        (-1.0, 0.25, 0.5, Side::Le),
        (3.0, 0.5, 2.0, Side::Ge),
        (0.0, 1.0, 3.0, Side::Ge),
    ];
    for (mu, var, bound, side) in cases {
        let kind = match side {
            Side::Ge => ConstraintKind::GreaterEq(bound),
            Side::Le => ConstraintKind::LessEq(bound),
        };
        let block = ConstraintBlock {
            mean: DVector::from_vec(vec![mu]),
            cov: DMatrix::from_vec(1, 1, vec![var]),
            constraints: vec![Constraint { index: 0, kind }],
        };
        let r = ep_condition(&block, &EpConfig::default()).unwrap();
        let (m, v) = truncated_moments(mu, var, bound, side).unwrap();
        assert!((r.mean[0] - m).abs() < 1e-10, "{mu} {var} {bound}");
        assert!((r.cov[(0, 0)] - v).abs() < 1e-10, "{mu} {var} {bound}");
    }
}

#[test]
fn slice_sampler_recovers_standard_normal_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SliceConfig { burn_in: 100, thin: 1, step_width: 1.0, max_step_out: 10 };
    let run = slice_sample(|x| -0.5 * x[0] * x[0], &[0.0], 10_000, &cfg, &mut rng).unwrap();
    let n = run.samples.len() as f64;
    let mean = run.samples.iter().map(|s| s[0]).sum::<f64>() / n;
    let var = run.samples.iter().map(|s| (s[0] - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.05, "{mean}");
    assert!((var - 1.0).abs() < 0.1, "{var}");
}

#[test]
fn overhead_map_recovers_noise_free_power_law() {
    for (a, b, c) in [(1.0, 0.1, 1.5), (0.5, 0.02, 2.0), (3.0, 0.5, 1.0)] {
        let hist: Vec<f64> = (1..=40).map(|n| a + b * (n as f64).powf(c)).collect();
        let m = fit_overhead_map(&hist);
        for (got, want) in m.theta[..3].iter().zip([a, b, c]) {
            assert!((got - want).abs() <= 0.05 * want, "{:?} vs {:?}", m.theta, (a, b, c));
        }
    }
}

#[test]
fn remaining_steps_constant_overhead_is_exact() {
    let m = OverheadModel::with_theta([2.0, 0.0, 1.0, 0.0], 1.0);
    // Each step costs exactly 10, so a budget of 100 holds 10 steps.
    assert_eq!(remaining_steps(&m, 100.0, 8.0), 9);
    assert_eq!(remaining_steps(&m, 99.9, 8.0), 8);
    assert_eq!(remaining_steps(&m, 10.0, 8.0), 0);
    assert_eq!(remaining_steps(&m, 1000.0, 8.0), 99);
}

#[test]
fn mixture_draws_stay_in_the_box() {
    let d = Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
    let comps = vec![
        MixtureComponent { weight: 0.5, center: vec![9.9, 0.1], cov: DMatrix::identity(2, 2) * 400.0 },
        MixtureComponent { weight: 0.3, center: vec![-4.9, 14.9], cov: DMatrix::from_row_slice(2, 2, &[4.0, 3.9, 3.9, 4.0]) },
        MixtureComponent { weight: 0.2, center: vec![2.0, 7.0], cov: DMatrix::identity(2, 2) * 1e-12 },
    ];
    let pts = draw_support(&comps, 100_000, &d, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(pts.len(), 100_000);
    assert!(pts.iter().all(|p| d.contains(p)));
}
