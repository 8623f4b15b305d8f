//! The outer optimization loop.
//!
//! Each step refits the hyperparameter mixture, draws support points and
//! minimizer samples, conditions them with EP, fits the cost models
//! (fidelity mode only), maximizes the acquisition, evaluates the objective
//! and then computes, offline, the posterior-mean minimizer that would be
//! reported if the run stopped there. The model works in the unit box; the
//! trace reports original coordinates.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::{fit_cost_gp, fit_overhead_map, CostDivisor, COST_FLOOR_FRAC};
use crate::domain::Domain;
use crate::gp::Observation;
use crate::hyper::{HyperConfig, HyperPosteriorSet, HyperPrior, LogNormalPrior, NoisePrior};
use crate::kernel::Deriv;
use crate::minimizer::{default_n_starts, expected_improvement, find_posterior_minima, incumbent_value, sample_argmins, wlh_support};
use crate::objectives::Benchmark;
use crate::pes::{optimize_acquisition, AcquisitionContext, AcquisitionSearch, PesConfig};
use crate::{Error, Result};

/// Step-selection policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Expected improvement at full fidelity.
    Ei,
    /// Predictive entropy search at full fidelity.
    Pes,
    /// Predictive entropy search over `(x, s)` weighted by expected cost.
    EnvPes,
}

/// What the run reports as its answer at each step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Reporting {
    /// Minimizer of the posterior mean at `s = 0`.
    PosteriorMin,
    /// Best observed full-fidelity value.
    ArgMin,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OverheadMode {
    /// Wall time of the selection phase.
    Measured,
    /// A constant charge per step, for reproducible traces.
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub mode: Mode,
    pub reporting: Reporting,
    /// Stop once cumulative eval plus overhead cost reaches this.
    pub budget_s: f64,
    /// Stop after this many evaluations, initialization included.
    pub max_evals: Option<usize>,
    pub n_init: usize,
    pub init_x_draws: usize,
    pub init_fidelities: Vec<f64>,
    pub hyper: HyperConfig,
    /// Support points per step.
    pub support_size: usize,
    /// Posterior draws over the support per step.
    pub argmin_samples: usize,
    pub pes: PesConfig,
    pub search: AcquisitionSearch,
    pub cost_floor_frac: f64,
    pub overhead: OverheadMode,
    /// Multiplier applied to simulated evaluation costs.
    pub eval_cost_scale: f64,
    /// Observation noise sd as a fraction of the sd of observed values.
    pub noise_frac: f64,
}

impl OptimizerConfig {
    pub fn new(mode: Mode) -> Self {
        OptimizerConfig {
            mode,
            reporting: Reporting::PosteriorMin,
            budget_s: f64::INFINITY,
            max_evals: None,
            n_init: 20,
            init_x_draws: 7,
            init_fidelities: vec![0.5, 0.75, 0.875],
            hyper: HyperConfig::default(),
            support_size: 100,
            argmin_samples: 1000,
            pes: PesConfig { global_min_constraint: true, ..PesConfig::default() },
            search: AcquisitionSearch { fix_s: mode != Mode::EnvPes, ..AcquisitionSearch::default() },
            cost_floor_frac: COST_FLOOR_FRAC,
            overhead: OverheadMode::Measured,
            eval_cost_scale: 1.0,
            noise_frac: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(Error::Config("n_init must be at least 1".into()));
        }
        if !(self.budget_s >= 0.0) {
            return Err(Error::Config("budget must be non-negative".into()));
        }
        if self.mode == Mode::EnvPes && (self.init_x_draws == 0 || self.init_fidelities.is_empty()) {
            return Err(Error::Config("fidelity initialization needs x draws and fidelity levels".into()));
        }
        if self.init_fidelities.iter().any(|s| !(0.0..=1.0).contains(s)) {
            return Err(Error::Config("initial fidelities must lie in [0, 1]".into()));
        }
        if self.support_size == 0 || self.argmin_samples == 0 {
            return Err(Error::Config("support size and argmin samples must be positive".into()));
        }
        if !(self.eval_cost_scale > 0.0) || !(self.noise_frac > 0.0) {
            return Err(Error::Config("cost scale and noise fraction must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that can be evaluated at `(x, s)` in original coordinates.
pub trait Problem {
    fn domain(&self) -> &Domain;
    /// Observed value and cost in seconds.
    fn evaluate(&mut self, x: &[f64], s: f64) -> Result<(f64, f64)>;
    /// Uncorrupted objective value, when known.
    fn true_value(&self, x: &[f64]) -> Option<f64>;
    fn f_star(&self) -> Option<f64>;
}

impl Problem for Benchmark {
    fn domain(&self) -> &Domain {
        Benchmark::domain(self)
    }

    fn evaluate(&mut self, x: &[f64], s: f64) -> Result<(f64, f64)> {
        Benchmark::evaluate(self, x, s)
    }

    fn true_value(&self, x: &[f64]) -> Option<f64> {
        Some(Benchmark::true_value(self, x))
    }

    fn f_star(&self) -> Option<f64> {
        Some(Benchmark::f_star(self))
    }
}

/// Seconds from an arbitrary origin.
pub trait Clock {
    fn now(&mut self) -> f64;
}

/// A clock that never advances.
#[derive(Clone, Copy, Debug, Default)]
pub struct StoppedClock;

impl Clock for StoppedClock {
    fn now(&mut self) -> f64 {
        0.0
    }
}

/// Per-row condition markers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct Flags(pub u32);

impl Flags {
    pub const INIT: u32 = 1;
    pub const UNIFORM_SUPPORT: u32 = 1 << 1;
    pub const ACQ_FALLBACK: u32 = 1 << 2;
    pub const REC_FALLBACK: u32 = 1 << 3;
    pub const RETRIED: u32 = 1 << 4;
    pub const PRIOR_OVERHEAD: u32 = 1 << 5;
    pub const BUDGET_IN_INIT: u32 = 1 << 6;
    pub const EP_DRAWS_FAILED: u32 = 1 << 7;

    const NAMES: [(u32, &'static str); 8] = [
        (Self::INIT, "init"),
        (Self::UNIFORM_SUPPORT, "uniform_support"),
        (Self::ACQ_FALLBACK, "acq_fallback"),
        (Self::REC_FALLBACK, "rec_fallback"),
        (Self::RETRIED, "retried"),
        (Self::PRIOR_OVERHEAD, "prior_overhead"),
        (Self::BUDGET_IN_INIT, "budget_in_init"),
        (Self::EP_DRAWS_FAILED, "ep_draws_failed"),
    ];

    pub fn set(&mut self, bit: u32) {
        self.0 |= bit;
    }

    pub fn has(&self, bit: u32) -> bool {
        self.0 & bit != 0
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        Self::NAMES.iter().filter(|(b, _)| self.has(*b)).map(|(_, n)| *n)
    }

    pub fn from_names<'a>(names: impl Iterator<Item = &'a str>) -> Option<Self> {
        let mut f = Flags::default();
        for n in names {
            let (bit, _) = Self::NAMES.iter().find(|(_, name)| *name == n)?;
            f.set(*bit);
        }
        Some(f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub x: Vec<f64>,
    pub s: f64,
    pub y: f64,
    pub eval_cost_s: f64,
    pub overhead_s: f64,
    /// Cost model prediction at the chosen point.
    pub predicted_cost_s: Option<f64>,
    pub n_remaining: Option<usize>,
    pub x_rec: Option<Vec<f64>>,
    /// Posterior mean at the recommendation.
    pub rec_mean: Option<f64>,
    pub immediate_regret: Option<f64>,
    pub cumulative_eval_cost_s: f64,
    pub cumulative_total_cost_s: f64,
    /// Clamped negative information gains during the acquisition search.
    pub clamped: usize,
    pub flags: Flags,
}

/// A finished or aborted run.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub trace: Vec<TraceRow>,
    pub error: Option<Error>,
}

/// Recommendation in unit coordinates with its posterior mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub x_unit: Vec<f64>,
    pub mean: f64,
    pub fallback: bool,
}

struct Selection {
    z: Vec<f64>,
    predicted_cost: Option<f64>,
    n_remaining: Option<usize>,
    clamped: usize,
    flags: Flags,
    hypers: HyperPosteriorSet,
}

pub struct Optimizer<P: Problem, C: Clock> {
    cfg: OptimizerConfig,
    problem: P,
    clock: C,
    rng: ChaCha8Rng,
    unit: Domain,
    data: Vec<Observation>,
    overheads: Vec<f64>,
    trace: Vec<TraceRow>,
    warm: Option<Vec<f64>>,
    cost_warm: Option<Vec<f64>>,
    last_rec: Option<Vec<f64>>,
    cum_eval: f64,
    cum_total: f64,
}

fn lift(x: &[f64], s: f64) -> Vec<f64> {
    let mut z = x.to_vec();
    z.push(s);
    z
}

impl<P: Problem, C: Clock> Optimizer<P, C> {
    pub fn new(cfg: OptimizerConfig, problem: P, clock: C, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let d = problem.domain().dim();
        Ok(Optimizer {
            cfg,
            problem,
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            unit: Domain::unit(d),
            data: Vec::new(),
            overheads: Vec::new(),
            trace: Vec::new(),
            warm: None,
            cost_warm: None,
            last_rec: None,
            cum_eval: 0.0,
            cum_total: 0.0,
        })
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    pub fn data(&self) -> &[Observation] {
        &self.data
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn problem(&self) -> &P {
        &self.problem
    }

    fn dim(&self) -> usize {
        self.unit.dim()
    }

    /// The initial design in unit coordinates: `(x, s)` pairs.
    pub fn initial_design(&mut self) -> Vec<(Vec<f64>, f64)> {
        let d = self.dim();
        let mut design = Vec::with_capacity(self.cfg.n_init);
        if self.cfg.mode == Mode::EnvPes {
            'outer: for _ in 0..self.cfg.init_x_draws {
                let x: Vec<f64> = (0..d).map(|_| self.rng.random::<f64>()).collect();
                for &s in &self.cfg.init_fidelities {
                    if design.len() == self.cfg.n_init {
                        break 'outer;
                    }
                    design.push((x.clone(), s));
                }
            }
        } else {
            for _ in 0..self.cfg.n_init {
                design.push(((0..d).map(|_| self.rng.random::<f64>()).collect(), 0.0));
            }
        }
        design
    }

    fn record(&mut self, x_unit: &[f64], s: f64) -> Result<(Vec<f64>, f64, f64)> {
        let x = self.problem.domain().from_unit(x_unit);
        let (y, cost) = self.problem.evaluate(&x, s)?;
        if !y.is_finite() || !(cost >= 0.0) {
            return Err(Error::InvalidRecord("objective returned a non-finite value or negative cost"));
        }
        let cost = cost * self.cfg.eval_cost_scale;
        self.data.push(Observation::value(lift(x_unit, s), y)?.with_cost(cost));
        Ok((x, y, cost))
    }

    fn budget_left(&self) -> bool {
        let evals_ok = self.cfg.max_evals.is_none_or(|m| self.data.len() < m);
        evals_ok && self.cum_total < self.cfg.budget_s
    }

    /// Evaluates the initial design and appends its rows. The last row
    /// carries the first recommendation.
    pub fn initialize(&mut self) -> Result<()> {
        let design = self.initial_design();
        for (i, (x_unit, s)) in design.iter().enumerate() {
            let (x, y, cost) = self.record(x_unit, *s)?;
            self.cum_eval += cost;
            self.cum_total += cost;
            let mut flags = Flags(Flags::INIT);
            if i + 1 == design.len() && self.cum_total >= self.cfg.budget_s {
                flags.set(Flags::BUDGET_IN_INIT);
            }
            self.trace.push(TraceRow {
                step: i,
                x,
                s: *s,
                y,
                eval_cost_s: cost,
                overhead_s: 0.0,
                predicted_cost_s: None,
                n_remaining: None,
                x_rec: None,
                rec_mean: None,
                immediate_regret: None,
                cumulative_eval_cost_s: self.cum_eval,
                cumulative_total_cost_s: self.cum_total,
                clamped: 0,
                flags,
            });
        }
        let seed = self.rng.random::<u64>();
        let hypers = self.fit_hypers(&mut ChaCha8Rng::seed_from_u64(seed))?;
        let rec = self.recommend(&hypers, seed);
        self.attach_recommendation(rec);
        Ok(())
    }

    fn attach_recommendation(&mut self, rec: Recommendation) {
        let x = self.problem.domain().from_unit(&rec.x_unit);
        let ir = match (self.problem.true_value(&x), self.problem.f_star()) {
            (Some(v), Some(f)) => Some(v - f),
            _ => None,
        };
        let row = self.trace.last_mut().expect("rows exist");
        row.x_rec = Some(x);
        row.rec_mean = Some(rec.mean);
        row.immediate_regret = ir;
        if rec.fallback {
            row.flags.set(Flags::REC_FALLBACK);
        }
        self.last_rec = Some(rec.x_unit);
    }

    /// Hyperparameter prior scaled to the data.
    pub fn hyper_prior(&self) -> HyperPrior {
        let ys: Vec<f64> = self.data.iter().map(|o| o.value).collect();
        let n = ys.len().max(1) as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
        let var = if var > 0.0 { var } else { 1.0 };
        let mut lengthscales = vec![LogNormalPrior::new(libm::log(0.3), 1.0); self.dim()];
        lengthscales.push(LogNormalPrior::new(0.0, 1.0));
        HyperPrior {
            amplitude: LogNormalPrior::new(libm::log(var), 1.0),
            lengthscales,
            noise: NoisePrior::Fixed(self.cfg.noise_frac * libm::sqrt(var)),
        }
    }

    fn fit_hypers(&mut self, rng: &mut ChaCha8Rng) -> Result<HyperPosteriorSet> {
        let prior = self.hyper_prior();
        let set = HyperPosteriorSet::sample(&self.data, &prior, &self.cfg.hyper, self.warm.as_deref(), rng)?;
        self.warm = set.warm_start().map(|w| w.to_vec());
        Ok(set)
    }

    /// Samples the hyperparameter mixture for the current data without
    /// touching the warm start used by [`Optimizer::step`].
    pub fn posterior(&self, seed: u64) -> Result<HyperPosteriorSet> {
        let prior = self.hyper_prior();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        HyperPosteriorSet::sample(&self.data, &prior, &self.cfg.hyper, self.warm.as_deref(), &mut rng)
    }

    /// The unit box the model works in.
    pub fn unit_domain(&self) -> &Domain {
        &self.unit
    }

    /// The reported answer for a fitted model. Never touches optimizer
    /// state.
    pub fn recommend(&self, hypers: &HyperPosteriorSet, seed: u64) -> Recommendation {
        let d = self.dim();
        if self.cfg.reporting == Reporting::ArgMin {
            let best = self
                .data
                .iter()
                .filter(|o| o.location[d] == 0.0 && o.kind == Deriv::Value)
                .min_by(|a, b| a.value.total_cmp(&b.value));
            if let Some(o) = best {
                return Recommendation { x_unit: o.location[..d].to_vec(), mean: hypers.mean_value(&o.location), fallback: false };
            }
        }
        let cands = find_posterior_minima(hypers, &self.unit, default_n_starts(d), seed);
        if let Some(c) = cands.iter().min_by(|a, b| a.mean.total_cmp(&b.mean)) {
            return Recommendation { x_unit: c.x.clone(), mean: c.mean, fallback: self.cfg.reporting == Reporting::ArgMin };
        }
        let (x, mean) = self
            .data
            .iter()
            .map(|o| {
                let z = lift(&o.location[..d], 0.0);
                (o.location[..d].to_vec(), hypers.mean_value(&z))
            })
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("data is non-empty");
        Recommendation { x_unit: x, mean, fallback: true }
    }

    fn select(&mut self, seed: u64) -> Result<Selection> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim();
        let hypers = self.fit_hypers(&mut rng)?;
        let mut flags = Flags::default();
        let acq_seed = rng.random::<u64>();

        if self.cfg.mode == Mode::Ei {
            let best = incumbent_value(&hypers);
            let (z, _) = optimize_acquisition(|z| Ok(expected_improvement(&hypers, &z[..d], best)), &self.unit, &[], &self.cfg.search, acq_seed)?;
            return Ok(Selection { z, predicted_cost: None, n_remaining: None, clamped: 0, flags, hypers });
        }

        let support = wlh_support(&hypers, &self.unit, self.cfg.support_size, default_n_starts(d), &mut rng);
        if support.uniform_fallback {
            flags.set(Flags::UNIFORM_SUPPORT);
        }
        let argmins = sample_argmins(&hypers, &support.points, self.cfg.argmin_samples, &mut rng)?;
        let ctx = match AcquisitionContext::build(&hypers, &support.points, &argmins, &self.cfg.pes) {
            Ok(ctx) => Some(ctx),
            Err(Error::AcquisitionUnavailable) => None,
            Err(e) => return Err(e),
        };
        if ctx.as_ref().is_some_and(|c| c.failed_draws() > 0) {
            flags.set(Flags::EP_DRAWS_FAILED);
        }

        let mut divisor_parts = None;
        let cost_model;
        if self.cfg.mode == Mode::EnvPes {
            let records: Vec<(Vec<f64>, f64)> = self.data.iter().map(|o| (o.location.clone(), o.cost.max(1e-12))).collect();
            cost_model = Some(fit_cost_gp(&records, self.cost_warm.as_deref(), rng.random::<u64>())?);
            let cm = cost_model.as_ref().expect("just fitted");
            self.cost_warm = Some(cm.theta().to_vec());
            let overhead = fit_overhead_map(&self.overheads);
            if overhead.prior_only {
                flags.set(Flags::PRIOR_OVERHEAD);
            }
            let rec = self.last_rec.clone().unwrap_or_else(|| vec![0.5; d]);
            let c_eval = cm.predict(&lift(&rec, 0.0));
            let remaining = (self.cfg.budget_s - self.cum_total).max(0.0);
            let remaining = if remaining.is_finite() { remaining } else { 1e12 };
            divisor_parts = Some(CostDivisor::new(cm, &overhead, remaining, c_eval, self.cfg.cost_floor_frac));
        } else {
            cost_model = None;
        }
        let _ = &cost_model;

        let (z, clamped) = match &ctx {
            Some(ctx) => {
                let (z, _) = optimize_acquisition(
                    |z| match &divisor_parts {
                        Some(div) => ctx.acquisition(z, div.divisor(z)),
                        None => Ok(ctx.delta_entropy(z)),
                    },
                    &self.unit,
                    &support.points,
                    &self.cfg.search,
                    acq_seed,
                )?;
                (z, ctx.clamped())
            }
            None => {
                flags.set(Flags::ACQ_FALLBACK);
                let (z, _) = optimize_acquisition(
                    |z| hypers.marginal_posterior(z, Deriv::Value).map(|m| m.variance()),
                    &self.unit,
                    &support.points,
                    &self.cfg.search,
                    acq_seed,
                )?;
                (z, 0)
            }
        };
        let predicted_cost = divisor_parts.as_ref().map(|div| div.cost.predict(&z));
        let n_remaining = divisor_parts.as_ref().map(|div| div.n_remaining);
        Ok(Selection { z, predicted_cost, n_remaining, clamped, flags, hypers })
    }

    /// One optimization step. A failing selection is retried once with a
    /// fresh seed.
    pub fn step(&mut self) -> Result<&TraceRow> {
        let step = self.trace.len();
        let t0 = self.clock.now();
        let warm_before = self.warm.clone();
        let cost_warm_before = self.cost_warm.clone();
        let first_seed = self.rng.random::<u64>();
        let sel = match self.select(first_seed) {
            Ok(sel) => sel,
            Err(_) => {
                self.warm = warm_before;
                self.cost_warm = cost_warm_before;
                let retry_seed = self.rng.random::<u64>();
                let mut sel = self.select(retry_seed).map_err(|e| Error::Step { step, source: Box::new(e) })?;
                sel.flags.set(Flags::RETRIED);
                sel
            }
        };
        let overhead = match self.cfg.overhead {
            OverheadMode::Measured => (self.clock.now() - t0).max(0.0),
            OverheadMode::Fixed(v) => v,
        };
        let d = self.dim();
        let s = sel.z[d].clamp(0.0, 1.0);
        let (x, y, cost) = self.record(&sel.z[..d], s).map_err(|e| Error::Step { step, source: Box::new(e) })?;
        self.overheads.push(overhead);
        self.cum_eval += cost;
        self.cum_total += cost + overhead;
        self.trace.push(TraceRow {
            step,
            x,
            s,
            y,
            eval_cost_s: cost,
            overhead_s: overhead,
            predicted_cost_s: sel.predicted_cost,
            n_remaining: sel.n_remaining,
            x_rec: None,
            rec_mean: None,
            immediate_regret: None,
            cumulative_eval_cost_s: self.cum_eval,
            cumulative_total_cost_s: self.cum_total,
            clamped: sel.clamped,
            flags: sel.flags,
        });
        // Offline recommendation: same hyperparameter draws, new data.
        let rec_seed = self.rng.random::<u64>();
        let rec = match sel.hypers.condition_on(&self.data) {
            Ok(h) => self.recommend(&h, rec_seed),
            Err(_) => {
                let mut r = self.recommend(&sel.hypers, rec_seed);
                r.fallback = true;
                r
            }
        };
        self.attach_recommendation(rec);
        Ok(self.trace.last().expect("row just pushed"))
    }

    /// Initialization followed by steps until the budget is spent. Errors
    /// end the run and are returned alongside the partial trace.
    pub fn run(mut self) -> RunOutcome {
        if let Err(e) = self.initialize() {
            return RunOutcome { trace: self.trace, error: Some(e) };
        }
        while self.budget_left() {
            if let Err(e) = self.step() {
                return RunOutcome { trace: self.trace, error: Some(e) };
            }
        }
        RunOutcome { trace: self.trace, error: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{BaseFunction, CostCurve};

    fn quick(mode: Mode) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::new(mode);
        cfg.hyper = HyperConfig { k: 2, burn_in: 10, warm_burn_in: 5, thin: 2, ..HyperConfig::default() };
        cfg.support_size = 20;
        cfg.argmin_samples = 100;
        cfg.pes.n_min_draws = 3;
        cfg.search.candidates_per_dim = 20;
        cfg.search.n_refine = 1;
        cfg.overhead = OverheadMode::Fixed(1.0);
        cfg
    }

    fn branin() -> Benchmark {
        Benchmark::new(BaseFunction::Branin, None, CostCurve::Quadratic { min: 120.0, max: 1800.0 })
    }

    #[test]
    fn fidelity_initial_design() {
        let mut opt = Optimizer::new(quick(Mode::EnvPes), branin(), StoppedClock, 5).unwrap();
        let design = opt.initial_design();
        assert_eq!(design.len(), 20);
        let count = |s: f64| design.iter().filter(|(_, v)| *v == s).count();
        assert_eq!((count(0.5), count(0.75), count(0.875)), (7, 7, 6));
        assert_eq!(design[0].0, design[2].0);
        assert_eq!(design[18].1, 0.5);
        assert_eq!(design[19].1, 0.75);
    }

    #[test]
    fn full_fidelity_initial_design_is_seeded() {
        let mut a = Optimizer::new(quick(Mode::Pes), branin(), StoppedClock, 5).unwrap();
        let mut b = Optimizer::new(quick(Mode::Pes), branin(), StoppedClock, 5).unwrap();
        let da = a.initial_design();
        assert_eq!(da.len(), 20);
        assert!(da.iter().all(|(_, s)| *s == 0.0));
        assert_eq!(da, b.initial_design());
    }

    #[test]
    fn budget_below_init_cost_keeps_only_init_rows() {
        let mut cfg = quick(Mode::Pes);
        cfg.budget_s = 100.0;
        let out = Optimizer::new(cfg, branin(), StoppedClock, 1).unwrap().run();
        assert!(out.error.is_none());
        assert_eq!(out.trace.len(), 20);
        assert!(out.trace.last().unwrap().flags.has(Flags::BUDGET_IN_INIT));
        assert!(out.trace.last().unwrap().immediate_regret.is_some());
    }

    #[test]
    fn steps_extend_trace_and_keep_accounting() {
        for mode in [Mode::Ei, Mode::Pes, Mode::EnvPes] {
            let mut cfg = quick(mode);
            cfg.max_evals = Some(23);
            let mut opt = Optimizer::new(cfg, branin(), StoppedClock, 3).unwrap();
            opt.initialize().unwrap();
            for k in 0..3 {
                let before = opt.trace().len();
                opt.step().unwrap();
                assert_eq!(opt.trace().len(), before + 1, "{mode:?} step {k}");
            }
            let mut overhead = 0.0;
            let mut prev = (0.0, 0.0);
            let dom = BaseFunction::Branin.domain();
            for row in opt.trace() {
                overhead += row.overhead_s;
                assert!((row.cumulative_total_cost_s - row.cumulative_eval_cost_s - overhead).abs() < 1e-9);
                assert!(row.cumulative_eval_cost_s >= prev.0 && row.cumulative_total_cost_s >= prev.1);
                prev = (row.cumulative_eval_cost_s, row.cumulative_total_cost_s);
                assert!((0.0..=1.0).contains(&row.s));
                if let Some(x) = &row.x_rec {
                    assert!(dom.contains(x));
                }
                if mode != Mode::EnvPes {
                    assert_eq!(row.s, 0.0);
                }
            }
            assert!(opt.trace().last().unwrap().immediate_regret.unwrap().is_finite());
        }
    }

    #[test]
    fn runs_are_deterministic_per_seed() {
        let mut cfg = quick(Mode::EnvPes);
        cfg.max_evals = Some(22);
        let a = Optimizer::new(cfg.clone(), branin(), StoppedClock, 9).unwrap().run();
        let b = Optimizer::new(cfg.clone(), branin(), StoppedClock, 9).unwrap().run();
        let c = Optimizer::new(cfg, branin(), StoppedClock, 10).unwrap().run();
        assert_eq!(a.trace, b.trace);
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn recommendation_near_deep_observation() {
        let mut opt = Optimizer::new(quick(Mode::Pes), branin(), StoppedClock, 0).unwrap();
        let spec = crate::kernel::KernelSpec::new(1.0, vec![0.05, 1.0], 1e-6).unwrap();
        let mut data = vec![Observation::value(vec![0.37, 0.0], -3.0).unwrap()];
        for x in [0.0, 0.2, 0.6, 0.8, 1.0] {
            data.push(Observation::value(vec![x, 0.0], 0.0).unwrap());
        }
        opt.unit = Domain::unit(1);
        opt.data = data.clone();
        let hypers = HyperPosteriorSet::from_specs(&data, &[spec]).unwrap();
        let before = opt.data.clone();
        let rec = opt.recommend(&hypers, 4);
        assert_eq!(opt.data, before);
        assert!((rec.x_unit[0] - 0.37).abs() < 0.1 * 0.05);
        assert!(!rec.fallback);
    }

    #[test]
    fn argmin_reporting_uses_best_observation() {
        let mut cfg = quick(Mode::Pes);
        cfg.reporting = Reporting::ArgMin;
        cfg.max_evals = Some(20);
        let out = Optimizer::new(cfg, branin(), StoppedClock, 2).unwrap().run();
        let best = out.trace.iter().min_by(|a, b| a.y.total_cmp(&b.y)).unwrap();
        let last = out.trace.last().unwrap();
        let rec = last.x_rec.as_ref().unwrap();
        assert!(rec.iter().zip(&best.x).all(|(a, b)| (a - b).abs() < 1e-9));
    }

    #[test]
    fn flag_names_round_trip() {
        let mut f = Flags::default();
        f.set(Flags::INIT);
        f.set(Flags::RETRIED);
        let names: Vec<&str> = f.names().collect();
        assert_eq!(names, vec!["init", "retried"]);
        assert_eq!(Flags::from_names(names.into_iter()), Some(f));
        assert_eq!(Flags::from_names(["bogus"].into_iter()), None);
    }
}
