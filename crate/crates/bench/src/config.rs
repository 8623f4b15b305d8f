//! Experiment configuration files.
//!
//! A config is TOML with four sections. Unknown keys are rejected, and an
//! unknown id produces an error that lists the accepted ones.
//!
//! ```toml
//! [experiment]
//! mode = "envpes"
//! runs = 10
//! seed = 0
//! budget_s = 36000.0
//!
//! [objective]
//! id = "branin"
//! fidelity = "linear-shift"
//!
//! [cost]
//! id = "quadratic"
//! min_s = 120.0
//! max_s = 1800.0
//! ```

use std::path::Path;

use envpes_core::hyper::HyperConfig;
use envpes_core::objectives::{BaseFunction, Benchmark, CostCurve, GpDraw, LinearShift};
use envpes_core::optimizer::{Mode, OptimizerConfig, OverheadMode, Reporting};
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeId {
    Ei,
    Pes,
    Envpes,
}

impl From<ModeId> for Mode {
    fn from(m: ModeId) -> Mode {
        match m {
            ModeId::Ei => Mode::Ei,
            ModeId::Pes => Mode::Pes,
            ModeId::Envpes => Mode::EnvPes,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportingId {
    #[default]
    PosteriorMin,
    Argmin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveId {
    Branin,
    Hartmann3,
    Hartmann6,
    GpDraw,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityId {
    #[default]
    None,
    LinearShift,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostId {
    Exponential,
    Quadratic,
    Constant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub mode: ModeId,
    #[serde(default)]
    pub reporting: ReportingId,
    #[serde(default = "one")]
    pub runs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Total cost budget (evaluation plus overhead) in seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSection {
    pub id: ObjectiveId,
    #[serde(default)]
    pub fidelity: FidelityId,
    /// Shift magnitude; defaults to a tenth of the objective's range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_scale: Option<f64>,
    /// Seed of the shift field; defaults to the experiment seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_ev: Option<f64>,
    /// Seed of a gp-draw objective; defaults to the run seed so every run
    /// optimizes its own draw.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    pub id: CostId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_c: Option<f64>,
    /// Cost at `s = 0` for the exponential curve.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub n_init: usize,
    pub hyper_samples: usize,
    pub hyper_burn_in: usize,
    pub hyper_warm_burn_in: usize,
    pub hyper_thin: usize,
    pub support_size: usize,
    pub argmin_samples: usize,
    pub min_draws: usize,
    pub hessian_conditions: bool,
    /// Defaults to on for plain PES and off for the fidelity mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub global_min_constraint: Option<bool>,
    pub candidates_per_dim: usize,
    pub n_refine: usize,
    /// Charge this many seconds of overhead per step instead of wall time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub overhead_fixed_s: Option<f64>,
    pub eval_cost_scale: f64,
    pub noise_frac: f64,
    pub cost_floor_frac: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let h = HyperConfig::default();
        let base = OptimizerConfig::new(Mode::EnvPes);
        OptimizerSection {
            n_init: base.n_init,
            hyper_samples: h.k,
            hyper_burn_in: h.burn_in,
            hyper_warm_burn_in: h.warm_burn_in,
            hyper_thin: h.thin,
            support_size: base.support_size,
            argmin_samples: base.argmin_samples,
            min_draws: base.pes.n_min_draws,
            hessian_conditions: base.pes.hessian_conditions,
            global_min_constraint: None,
            candidates_per_dim: base.search.candidates_per_dim,
            n_refine: base.search.n_refine,
            overhead_fixed_s: None,
            eval_cost_scale: base.eval_cost_scale,
            noise_frac: base.noise_frac,
            cost_floor_frac: base.cost_floor_frac,
        }
    }
}

/// Settings of the support-sampler study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub steps: usize,
    pub support_size: usize,
    pub argmin_samples: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        SamplerSection { steps: 30, support_size: 1000, argmin_samples: 10_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateSection {
    pub grid_points: usize,
}

impl Default for AggregateSection {
    fn default() -> Self {
        AggregateSection { grid_points: 101 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentFile {
    pub experiment: ExperimentSection,
    pub objective: ObjectiveSection,
    pub cost: CostSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub aggregate: AggregateSection,
}

fn one() -> usize {
    1
}

fn need<T: Copy>(v: Option<T>, key: &str, when: &str) -> Result<T> {
    v.ok_or_else(|| BenchError::Config(format!("{key} is required for {when}")))
}

impl ExperimentFile {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ExperimentFile = toml::from_str(text).map_err(|e| BenchError::Config(e.message().to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks mode- and id-specific keys without building anything heavy.
    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.runs == 0 {
            return Err(BenchError::Config("experiment.runs must be at least 1".into()));
        }
        if e.budget_s.is_none() && e.max_evals.is_none() {
            return Err(BenchError::Config("set experiment.budget_s or experiment.max_evals".into()));
        }
        if e.jobs == Some(0) {
            return Err(BenchError::Config("experiment.jobs must be at least 1".into()));
        }
        let o = &self.objective;
        if o.id == ObjectiveId::GpDraw {
            let d = need(o.d, "objective.d", "gp-draw")?;
            if d == 0 || d > 6 {
                return Err(BenchError::Config("objective.d must be in 1..=6".into()));
            }
            for (v, key) in [(o.lengthscale, "objective.lengthscale"), (o.l_ev, "objective.l_ev")] {
                let v = need(v, key, "gp-draw")?;
                if v.is_nan() || v <= 0.0 {
                    return Err(BenchError::Config(format!("{key} must be positive")));
                }
            }
        } else if o.d.is_some() || o.lengthscale.is_some() || o.l_ev.is_some() || o.draw_seed.is_some() {
            return Err(BenchError::Config("d, lengthscale, l_ev and draw_seed only apply to gp-draw".into()));
        }
        if o.fidelity == FidelityId::None && (o.shift_scale.is_some() || o.shift_seed.is_some()) {
            return Err(BenchError::Config("shift keys need objective.fidelity = \"linear-shift\"".into()));
        }
        self.cost_curve()?;
        if self.aggregate.grid_points < 2 {
            return Err(BenchError::Config("aggregate.grid_points must be at least 2".into()));
        }
        self.optimizer_config()?.validate()?;
        Ok(())
    }

    pub fn cost_curve(&self) -> Result<CostCurve> {
        let c = &self.cost;
        let curve = match c.id {
            CostId::Exponential => CostCurve::Exponential {
                l_c: need(c.l_c, "cost.l_c", "exponential cost")?,
                scale: c.scale_s.unwrap_or(1.0),
            },
            CostId::Quadratic => CostCurve::Quadratic {
                min: need(c.min_s, "cost.min_s", "quadratic cost")?,
                max: need(c.max_s, "cost.max_s", "quadratic cost")?,
            },
            CostId::Constant => CostCurve::Constant(need(c.value_s, "cost.value_s", "constant cost")?),
        };
        if !(curve.cost(0.0) > 0.0 && curve.cost(1.0) > 0.0) || !curve.cost(0.0).is_finite() {
            return Err(BenchError::Config("cost must be positive and finite on [0, 1]".into()));
        }
        Ok(curve)
    }

    /// The objective for one run.
    pub fn benchmark(&self, run_seed: u64) -> Result<Benchmark> {
        let o = &self.objective;
        let base = match o.id {
            ObjectiveId::Branin => BaseFunction::Branin,
            ObjectiveId::Hartmann3 => BaseFunction::Hartmann3,
            ObjectiveId::Hartmann6 => BaseFunction::Hartmann6,
            ObjectiveId::GpDraw => BaseFunction::GpDraw(GpDraw::new(
                need(o.d, "objective.d", "gp-draw")?,
                need(o.lengthscale, "objective.lengthscale", "gp-draw")?,
                need(o.l_ev, "objective.l_ev", "gp-draw")?,
                o.draw_seed.unwrap_or(run_seed),
            )?),
        };
        let shift = match o.fidelity {
            FidelityId::None => None,
            FidelityId::LinearShift => {
                let scale = o.shift_scale.unwrap_or(0.1 * base.range());
                Some(LinearShift::new(&base.domain(), scale, o.shift_seed.unwrap_or(self.experiment.seed))?)
            }
        };
        Ok(Benchmark::new(base, shift, self.cost_curve()?))
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig> {
        let e = &self.experiment;
        let o = &self.optimizer;
        let mut cfg = OptimizerConfig::new(e.mode.into());
        cfg.reporting = match e.reporting {
            ReportingId::PosteriorMin => Reporting::PosteriorMin,
            ReportingId::Argmin => Reporting::ArgMin,
        };
        cfg.budget_s = e.budget_s.unwrap_or(f64::INFINITY);
        cfg.max_evals = e.max_evals;
        cfg.n_init = o.n_init;
        cfg.hyper = HyperConfig {
            k: o.hyper_samples,
            burn_in: o.hyper_burn_in,
            warm_burn_in: o.hyper_warm_burn_in,
            thin: o.hyper_thin,
            ..HyperConfig::default()
        };
        cfg.support_size = o.support_size;
        cfg.argmin_samples = o.argmin_samples;
        cfg.pes.n_min_draws = o.min_draws;
        cfg.pes.hessian_conditions = o.hessian_conditions;
        if let Some(g) = o.global_min_constraint {
            cfg.pes.global_min_constraint = g;
        }
        cfg.search.candidates_per_dim = o.candidates_per_dim;
        cfg.search.n_refine = o.n_refine;
        cfg.overhead = match o.overhead_fixed_s {
            Some(v) if v >= 0.0 => OverheadMode::Fixed(v),
            Some(_) => return Err(BenchError::Config("optimizer.overhead_fixed_s must be non-negative".into())),
            None => OverheadMode::Measured,
        };
        cfg.eval_cost_scale = o.eval_cost_scale;
        cfg.noise_frac = o.noise_frac;
        cfg.cost_floor_frac = o.cost_floor_frac;
        if o.hyper_samples == 0 || o.hyper_thin == 0 {
            return Err(BenchError::Config("optimizer.hyper_samples and hyper_thin must be at least 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Seeds of the configured runs.
    pub fn run_seeds(&self) -> impl Iterator<Item = u64> {
        let base = self.experiment.seed;
        (0..self.experiment.runs as u64).map(move |r| base + r)
    }
}
