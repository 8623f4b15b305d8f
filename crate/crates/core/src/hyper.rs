//! Hyperparameter marginalization: slice sampling of the kernel
//! hyperparameters in log space and the equally weighted mixture of the
//! resulting per-draw posteriors.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use crate::gp::{log_marginal_likelihood, GpState, Observation};
use crate::kernel::{Deriv, KernelSpec};
use crate::slice::{slice_sample, SliceConfig};
use crate::{Error, Result};

/// Gaussian prior on the natural log of a positive parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogNormalPrior {
    pub log_mean: f64,
    pub log_sd: f64,
}

impl LogNormalPrior {
    pub fn new(log_mean: f64, log_sd: f64) -> Self {
        LogNormalPrior { log_mean, log_sd }
    }

    pub(crate) fn log_density(&self, v: f64) -> f64 {
        let z = (v - self.log_mean) / self.log_sd;
        -0.5 * z * z - libm::log(self.log_sd) - 0.5 * libm::log(2.0 * PI)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoisePrior {
    Fixed(f64),
    LogNormal(LogNormalPrior),
}

/// Independent log-space priors on amplitude, lengthscales and noise.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperPrior {
    pub amplitude: LogNormalPrior,
    pub lengthscales: Vec<LogNormalPrior>,
    pub noise: NoisePrior,
}

impl HyperPrior {
    pub fn validate(&self) -> Result<()> {
        let mut sds = self.lengthscales.iter().chain(core::iter::once(&self.amplitude)).map(|p| p.log_sd);
        if sds.any(|s| !(s > 0.0)) {
            return Err(Error::InvalidSpec("prior log-sd must be positive"));
        }
        match self.noise {
            NoisePrior::Fixed(sd) if !(sd >= 0.0) => Err(Error::InvalidSpec("noise_sd must be non-negative")),
            NoisePrior::LogNormal(p) if !(p.log_sd > 0.0) => Err(Error::InvalidSpec("prior log-sd must be positive")),
            _ => Ok(()),
        }
    }

    /// Number of sampled coordinates.
    pub fn n_params(&self) -> usize {
        1 + self.lengthscales.len() + usize::from(matches!(self.noise, NoisePrior::LogNormal(_)))
    }

    /// Prior means in log space, used to start the first chain.
    pub fn center(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.push(self.amplitude.log_mean);
        v.extend(self.lengthscales.iter().map(|p| p.log_mean));
        if let NoisePrior::LogNormal(p) = self.noise {
            v.push(p.log_mean);
        }
        v
    }

    pub fn spec(&self, theta: &[f64]) -> KernelSpec {
        let d = self.lengthscales.len();
        let noise_sd = match self.noise {
            NoisePrior::Fixed(sd) => sd,
            NoisePrior::LogNormal(_) => libm::exp(theta[1 + d]),
        };
        KernelSpec {
            amplitude: libm::exp(theta[0]),
            lengthscales: theta[1..1 + d].iter().map(|t| libm::exp(*t)).collect(),
            noise_sd,
        }
    }

    pub fn log_prior(&self, theta: &[f64]) -> f64 {
        let d = self.lengthscales.len();
        let mut lp = self.amplitude.log_density(theta[0]);
        for (p, t) in self.lengthscales.iter().zip(&theta[1..1 + d]) {
            lp += p.log_density(*t);
        }
        if let NoisePrior::LogNormal(p) = self.noise {
            lp += p.log_density(theta[1 + d]);
        }
        lp
    }

    /// Unnormalized log posterior; `-∞` where the model cannot be factored.
    pub fn log_posterior(&self, data: &[Observation], theta: &[f64]) -> f64 {
        if theta.iter().any(|t| !t.is_finite() || t.abs() > 50.0) {
            return f64::NEG_INFINITY;
        }
        match log_marginal_likelihood(data, &self.spec(theta)) {
            Ok(l) if l.is_finite() => l + self.log_prior(theta),
            _ => f64::NEG_INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperConfig {
    pub k: usize,
    pub burn_in: usize,
    /// Burn-in used instead of `burn_in` when the chain is warm-started.
    pub warm_burn_in: usize,
    pub thin: usize,
    pub step_width: f64,
    pub max_step_out: usize,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig { k: 8, burn_in: 100, warm_burn_in: 20, thin: 10, step_width: 1.0, max_step_out: 10 }
    }
}

/// An equally weighted Gaussian mixture for one queried quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl Mixture {
    pub fn mean(&self) -> f64 {
        self.means.iter().sum::<f64>() / self.means.len() as f64
    }

    /// Law of total variance over the components.
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let k = self.means.len() as f64;
        self.variances.iter().zip(&self.means).map(|(v, mu)| v + (mu - m) * (mu - m)).sum::<f64>() / k
    }
}

/// `K` hyperparameter draws and their fitted posteriors.
#[derive(Clone, Debug)]
pub struct HyperPosteriorSet {
    states: Vec<GpState>,
    log_params: Vec<Vec<f64>>,
    log_posteriors: Vec<f64>,
    capped_brackets: usize,
}

impl HyperPosteriorSet {
    /// Slice-samples `cfg.k` hyperparameter vectors from their posterior.
    /// `warm` restarts the chain from a previous state instead of the prior
    /// center.
    pub fn sample<R: Rng + ?Sized>(
        data: &[Observation],
        prior: &HyperPrior,
        cfg: &HyperConfig,
        warm: Option<&[f64]>,
        rng: &mut R,
    ) -> Result<Self> {
        prior.validate()?;
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let k = cfg.k.max(1);
        let mut burn_in = cfg.warm_burn_in;
        let mut init = match warm {
            Some(w) if w.len() == prior.n_params() => w.to_vec(),
            _ => {
                burn_in = cfg.burn_in;
                prior.center()
            }
        };
        if !prior.log_posterior(data, &init).is_finite() {
            init = prior.center();
            burn_in = cfg.burn_in;
        }
        let slice_cfg = SliceConfig { burn_in, thin: cfg.thin, step_width: cfg.step_width, max_step_out: cfg.max_step_out };
        let run = slice_sample(|t| prior.log_posterior(data, t), &init, k, &slice_cfg, rng)?;
        let mut states = Vec::with_capacity(k);
        for theta in &run.samples {
            states.push(GpState::fit(data.to_vec(), prior.spec(theta))?);
        }
        Ok(HyperPosteriorSet {
            states,
            log_params: run.samples,
            log_posteriors: run.log_densities,
            capped_brackets: run.capped_brackets,
        })
    }

    /// Fits one state per given spec.
    pub fn from_specs(data: &[Observation], specs: &[KernelSpec]) -> Result<Self> {
        if specs.is_empty() {
            return Err(Error::InvalidSpec("at least one hyperparameter draw is required"));
        }
        let states = specs.iter().map(|s| GpState::fit(data.to_vec(), s.clone())).collect::<Result<Vec<_>>>()?;
        Ok(HyperPosteriorSet { states, log_params: Vec::new(), log_posteriors: Vec::new(), capped_brackets: 0 })
    }

    /// The same hyperparameter draws conditioned on a different data set.
    pub fn condition_on(&self, data: &[Observation]) -> Result<Self> {
        let specs: Vec<KernelSpec> = self.states.iter().map(|s| s.spec().clone()).collect();
        let mut set = Self::from_specs(data, &specs)?;
        set.log_params = self.log_params.clone();
        set.log_posteriors = self.log_posteriors.clone();
        Ok(set)
    }

    pub fn k(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[GpState] {
        &self.states
    }

    pub fn capped_brackets(&self) -> usize {
        self.capped_brackets
    }

    /// The draw with the highest log posterior, for warm-starting the next
    /// chain.
    pub fn warm_start(&self) -> Option<&[f64]> {
        self.log_posteriors
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| self.log_params[i].as_slice())
    }

    pub fn data(&self) -> &[Observation] {
        self.states[0].data()
    }

    /// Mean amplitude across draws.
    pub fn mean_amplitude(&self) -> f64 {
        self.states.iter().map(|s| s.spec().amplitude).sum::<f64>() / self.k() as f64
    }

    /// Smallest lengthscale over the first `dims` coordinates and all draws.
    pub fn min_lengthscale(&self, dims: usize) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.spec().lengthscales[..dims].iter().copied())
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-draw posterior of one quantity as an equally weighted mixture.
    pub fn marginal_posterior(&self, query: &[f64], kind: Deriv) -> Result<Mixture> {
        let mut means = Vec::with_capacity(self.k());
        let mut variances = Vec::with_capacity(self.k());
        for s in &self.states {
            let (m, c) = s.posterior(&[(query, kind)])?;
            means.push(m[0]);
            variances.push(c[(0, 0)].max(0.0));
        }
        Ok(Mixture { means, variances })
    }

    pub fn mean_value(&self, x: &[f64]) -> f64 {
        self.states.iter().map(|s| s.mean_value(x)).sum::<f64>() / self.k() as f64
    }

    /// Mixture mean value and gradient over the first `grad_dims`
    /// coordinates.
    pub fn mean_value_grad(&self, x: &[f64], grad_dims: usize, grad: &mut [f64]) -> f64 {
        let mut tmp = alloc::vec![0.0; grad_dims];
        grad[..grad_dims].iter_mut().for_each(|g| *g = 0.0);
        let mut v = 0.0;
        for s in &self.states {
            v += s.mean_value_grad(x, grad_dims, &mut tmp);
            for (g, t) in grad.iter_mut().zip(&tmp) {
                *g += t;
            }
        }
        let k = self.k() as f64;
        grad[..grad_dims].iter_mut().for_each(|g| *g /= k);
        v / k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn data() -> Vec<Observation> {
        (0..6)
            .map(|i| {
                let x = i as f64 / 5.0;
                Observation::value(vec![x, 0.0], libm::sin(6.0 * x)).unwrap()
            })
            .collect()
    }

    fn prior() -> HyperPrior {
        HyperPrior {
            amplitude: LogNormalPrior::new(0.0, 1.0),
            lengthscales: vec![LogNormalPrior::new(-1.0, 1.0), LogNormalPrior::new(0.0, 1.0)],
            noise: NoisePrior::Fixed(1e-3),
        }
    }

    #[test]
    fn draws_are_positive_and_reproducible() {
        let cfg = HyperConfig { k: 4, burn_in: 20, thin: 2, ..HyperConfig::default() };
        let a = HyperPosteriorSet::sample(&data(), &prior(), &cfg, None, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = HyperPosteriorSet::sample(&data(), &prior(), &cfg, None, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(a.k(), 4);
        for (sa, sb) in a.states().iter().zip(b.states()) {
            assert_eq!(sa.spec(), sb.spec());
            assert!(sa.spec().amplitude > 0.0 && sa.spec().lengthscales.iter().all(|h| *h > 0.0));
        }
        assert!(a.warm_start().is_some());
    }

    #[test]
    fn degenerate_mixtures() {
        let spec = KernelSpec::new(1.0, vec![0.3, 1.0], 1e-3).unwrap();
        let one = HyperPosteriorSet::from_specs(&data(), core::slice::from_ref(&spec)).unwrap();
        let q = [0.33, 0.0];
        let mix = one.marginal_posterior(&q, Deriv::Value).unwrap();
        let (m, v) = one.states()[0].predict_value(&q);
        assert!((mix.mean() - m).abs() < 1e-12 && (mix.variance() - v).abs() < 1e-12);

        let two = HyperPosteriorSet::from_specs(&data(), &[spec.clone(), spec]).unwrap();
        let mix = two.marginal_posterior(&q, Deriv::Value).unwrap();
        assert_eq!(mix.means[0], mix.means[1]);
        assert_eq!(mix.variances[0], mix.variances[1]);
    }

    #[test]
    fn mixture_mean_is_average() {
        let s1 = KernelSpec::new(1.0, vec![0.3, 1.0], 1e-3).unwrap();
        let s2 = KernelSpec::new(2.0, vec![0.8, 1.0], 1e-3).unwrap();
        let set = HyperPosteriorSet::from_specs(&data(), &[s1, s2]).unwrap();
        let mix = set.marginal_posterior(&[0.5, 0.0], Deriv::Value).unwrap();
        assert!((mix.mean() - 0.5 * (mix.means[0] + mix.means[1])).abs() < 1e-15);
        let mut g = [0.0];
        let v = set.mean_value_grad(&[0.5, 0.0], 1, &mut g);
        assert!((v - mix.mean()).abs() < 1e-12);
    }

    #[test]
    fn invalid_prior_rejected() {
        let mut p = prior();
        p.amplitude.log_sd = 0.0;
        let r = HyperPosteriorSet::sample(&data(), &p, &HyperConfig::default(), None, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(r.is_err());
    }
}
