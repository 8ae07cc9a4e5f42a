//! Run configuration: one JSON document per run describing the instance
//! (demand, price, geometry rule, cost parameters) and the task parameters
//! for every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use wdsco_core::{
    validate_instance, ChainSpec, CostParams, GeometryRule, PolicyForm, PriceModel,
    QuantizedDemandModel, SpsaConfig, ThresholdPolicy,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    #[serde(default)]
    pub task: TaskConfig,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub demand: QuantizedDemandModel,
    pub price: PriceModel,
    pub geometry: GeometryRule,
    pub cost_params: CostParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TaskConfig {
    /// Planning horizon N in intervals.
    #[serde(default)]
    pub horizon_n: Option<u64>,
    /// Candidate tank sizes for the co-design sweep.
    #[serde(default)]
    pub candidates: Vec<f64>,
    #[serde(default)]
    pub policy_form: PolicyForm,
    /// Tank size for single-design tasks (chain, stationary, evaluate,
    /// optimize, simulate).
    #[serde(default)]
    pub v: Option<f64>,
    /// Explicit thresholds for tasks that evaluate a given policy.
    #[serde(default)]
    pub policy: Option<PolicyInit>,
    #[serde(default)]
    pub spsa: SpsaPartial,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub npv: Option<NpvConfig>,
    #[serde(default)]
    pub sensitivity: Option<SensitivityConfig>,
    #[serde(default)]
    pub surface: Option<SurfaceConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

/// Thresholds given either as one state-independent value or as the full
/// per-phase matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyInit {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl PolicyInit {
    pub fn build(&self, spec: &ChainSpec) -> Result<ThresholdPolicy> {
        let policy = match self {
            PolicyInit::Scalar(alpha) => ThresholdPolicy::uniform(*alpha, spec)?,
            PolicyInit::Matrix(rows) => ThresholdPolicy::new(rows.clone())?,
        };
        policy.check_dims(spec)?;
        Ok(policy)
    }
}

/// Optional overrides over the price-derived SPSA defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpsaPartial {
    #[serde(default)]
    pub iterations: Option<usize>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub a0: Option<f64>,
    #[serde(default)]
    pub c0: Option<f64>,
    #[serde(default, rename = "A")]
    pub big_a: Option<f64>,
    #[serde(default)]
    pub alpha_exp: Option<f64>,
    #[serde(default)]
    pub gamma_exp: Option<f64>,
    /// Threshold box as `[lo, hi]`.
    #[serde(default, rename = "box")]
    pub box_bounds: Option<(f64, f64)>,
    #[serde(default)]
    pub polish_evals: Option<usize>,
}

impl SpsaPartial {
    pub fn build(&self, price: &PriceModel, seed_override: Option<u64>) -> Result<SpsaConfig> {
        let mut config = SpsaConfig::for_price_model(
            self.iterations.unwrap_or(2000),
            seed_override.or(self.seed).unwrap_or(0),
            price,
        );
        if let Some(restarts) = self.restarts {
            config.restarts = restarts;
        }
        if self.a0.is_some() {
            config.a0 = self.a0;
        }
        if let Some(c0) = self.c0 {
            config.c0 = c0;
        }
        if self.big_a.is_some() {
            config.big_a = self.big_a;
        }
        if let Some(alpha_exp) = self.alpha_exp {
            config.alpha_exp = alpha_exp;
        }
        if let Some(gamma_exp) = self.gamma_exp {
            config.gamma_exp = gamma_exp;
        }
        if let Some((lo, hi)) = self.box_bounds {
            config.box_lo = lo;
            config.box_hi = hi;
        }
        if let Some(polish) = self.polish_evals {
            config.polish_evals = polish;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n_steps: u64,
    /// Explicit seeds; when absent, `seed_count` seeds are derived from the
    /// run seed.
    #[serde(default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub seed_count: Option<usize>,
    /// Initial volume index; defaults to half the tank.
    #[serde(default)]
    pub x0: Option<usize>,
    /// Extra horizon values for the convergence report.
    #[serde(default)]
    pub n_grid: Option<Vec<u64>>,
}

impl SimulationConfig {
    pub fn resolve_seeds(&self, base: u64) -> Vec<u64> {
        match &self.seeds {
            Some(seeds) if !seeds.is_empty() => seeds.clone(),
            _ => {
                let count = self.seed_count.unwrap_or(1).max(1);
                (0..count as u64).map(|i| base.wrapping_add(i)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NpvConfig {
    pub k_per_year: u64,
    pub beta: f64,
    pub xi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityConfig {
    /// Tank size of the frozen design for the re-pricing study; its policy
    /// is optimized under the first `true_grid` entry.
    pub fixed_v: f64,
    /// `(mu, sigma)` pairs to re-price the frozen design under; the first
    /// entry is the design-time baseline.
    pub true_grid: Vec<(f64, f64)>,
    /// `(mu, sigma)` pairs assumed during design in the misassumption study;
    /// the first entry is the correctly-informed baseline.
    pub assumed_grid: Vec<(f64, f64)>,
    /// Parameters the misassumed designs are evaluated under.
    pub true_params: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceConfig {
    pub v_values: Vec<f64>,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub alpha_step: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitConfig {
    pub demand_csv: PathBuf,
    pub price_csv: PathBuf,
    pub quantum_d: f64,
    #[serde(rename = "period_T")]
    pub period_t: usize,
    pub extreme_cutoff: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let raw = std::fs::read(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: RunConfig = serde_json::from_slice(&raw)
            .with_context(|| format!("cannot parse config {}", path.display()))?;
        Ok((config, raw))
    }

    /// Every task runs against a validated instance; the geometry rule is
    /// checked against a representative tank size.
    pub fn validate_instance(&self) -> Result<wdsco_core::ValidationReport> {
        self.instance.demand.validate()?;
        self.instance.price.validate()?;
        self.instance.cost_params.validate()?;
        let v = self.representative_v()?;
        let spec = self.instance.geometry.chain_spec_for(v, &self.instance.demand)?;
        Ok(validate_instance(&self.instance.demand, &self.instance.price, &spec))
    }

    /// A tank size to validate and run single-design tasks against.
    pub fn representative_v(&self) -> Result<f64> {
        if let Some(v) = self.task.v {
            return Ok(v);
        }
        if let Some(first) = self.task.candidates.first() {
            return Ok(*first);
        }
        bail!("config needs either task.v or a non-empty task.candidates list");
    }

    pub fn horizon(&self) -> Result<u64> {
        self.task
            .horizon_n
            .ok_or_else(|| anyhow::anyhow!("config needs task.horizon_n for this subcommand"))
    }

    pub fn chain_spec(&self, v: f64) -> Result<ChainSpec> {
        Ok(self.instance.geometry.chain_spec_for(v, &self.instance.demand)?)
    }

    pub fn policy_for(&self, spec: &ChainSpec) -> Result<ThresholdPolicy> {
        match &self.task.policy {
            Some(init) => init.build(spec),
            None => bail!("config needs task.policy (a scalar threshold or a full matrix)"),
        }
    }
}
