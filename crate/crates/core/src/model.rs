//! Domain types for the quantized aggregated water distribution system,
//! instance validation, and parameter estimation from time-series data.
//!
//! Volumes are measured on the grid `delta_x = d * dt`: the tank holds
//! `n * delta_x`, demand takes level `tau` (volume `tau * d` per interval)
//! with per-phase probability `probs[kappa][tau]`, and the pump moves `zeta`
//! grid steps per interval when running.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Sample;

const PROB_SUM_TOL: f64 = 1e-12;
const GRID_TOL: f64 = 1e-9;

/// Periodic table of demand-level probabilities on the grid `tau * quantum_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedDemandModel {
    /// Demand volume per interval represented by one level step.
    pub quantum_d: f64,
    /// Number of demand levels; levels are `0..levels_m`.
    pub levels_m: usize,
    /// Intervals per cycle.
    #[serde(rename = "period_T")]
    pub period_t: usize,
    /// `probs[kappa][tau]` = probability of demand level `tau` at phase `kappa`.
    pub probs: Vec<Vec<f64>>,
}

impl QuantizedDemandModel {
    pub fn new(quantum_d: f64, probs: Vec<Vec<f64>>) -> Result<Self> {
        let period_t = probs.len();
        let levels_m = probs.first().map_or(0, Vec::len);
        let model = Self { quantum_d, levels_m, period_t, probs };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantum_d > 0.0) || !self.quantum_d.is_finite() {
            return Err(Error::InvalidModel("demand quantum must be positive".into()));
        }
        if self.period_t < 1 || self.levels_m < 1 {
            return Err(Error::InvalidModel("demand model needs T >= 1 and m >= 1".into()));
        }
        if self.probs.len() != self.period_t {
            return Err(Error::InvalidModel(format!(
                "demand probs has {} rows, expected period T = {}",
                self.probs.len(),
                self.period_t
            )));
        }
        for (kappa, row) in self.probs.iter().enumerate() {
            if row.len() != self.levels_m {
                return Err(Error::InvalidModel(format!(
                    "demand probs row {kappa} has {} levels, expected m = {}",
                    row.len(),
                    self.levels_m
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidModel(format!(
                    "demand probs row {kappa} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_SUM_TOL {
                return Err(Error::InvalidModel(format!(
                    "demand probs row {kappa} sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    /// Smallest and largest demand level with positive probability in any phase.
    pub fn support_bounds(&self) -> (usize, usize) {
        let mut lo = self.levels_m - 1;
        let mut hi = 0;
        for row in &self.probs {
            for (tau, p) in row.iter().enumerate() {
                if *p > 0.0 {
                    lo = lo.min(tau);
                    hi = hi.max(tau);
                }
            }
        }
        (lo, hi)
    }
}

/// Per-phase Gaussian electricity price parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceModel {
    /// Intervals per cycle.
    #[serde(rename = "period_T")]
    pub period_t: usize,
    /// Mean price per phase, currency/MWh.
    pub mean: Vec<f64>,
    /// Price standard deviation per phase, currency/MWh; strictly positive.
    pub std: Vec<f64>,
}

impl PriceModel {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let model = Self { period_t: mean.len(), mean, std };
        model.validate()?;
        Ok(model)
    }

    /// Single-phase model, the setting of the illustrative examples.
    pub fn single_phase(mean: f64, std: f64) -> Result<Self> {
        Self::new(vec![mean], vec![std])
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_t < 1 {
            return Err(Error::InvalidModel("price model needs T >= 1".into()));
        }
        if self.mean.len() != self.period_t || self.std.len() != self.period_t {
            return Err(Error::InvalidModel(format!(
                "price model vectors must both have length T = {}",
                self.period_t
            )));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidModel("price mean must be finite".into()));
        }
        if self.std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidModel("price std must be finite and > 0".into()));
        }
        Ok(())
    }
}

/// Integer tank geometry plus the volume quantum.
///
/// Control regimes by volume index `i`: enforced pumping for `i <= n_p`,
/// price-threshold pumping for `n_p < i <= n_s`, no pumping for `i > n_s`.
/// A penalty applies whenever `i <= n_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Maximum volume index; tank size is `n * delta_x`.
    pub n: usize,
    /// Enforced-pumping ceiling index.
    pub n_p: usize,
    /// Threshold-pumping ceiling index.
    pub n_s: usize,
    /// Penalty ceiling index.
    pub n_r: usize,
    /// Pump flow in grid steps per interval.
    pub zeta: usize,
    /// Volume quantum `d * dt`.
    pub delta_x: f64,
    /// Intervals per cycle.
    #[serde(rename = "period_T")]
    pub period_t: usize,
}

impl ChainSpec {
    pub fn new(
        n: usize,
        n_p: usize,
        n_s: usize,
        n_r: usize,
        zeta: usize,
        delta_x: f64,
        period_t: usize,
    ) -> Result<Self> {
        let spec = Self { n, n_p, n_s, n_r, zeta, delta_x, period_t };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.period_t < 1 {
            return Err(Error::InvalidModel("chain spec needs T >= 1".into()));
        }
        if !(self.delta_x > 0.0) || !self.delta_x.is_finite() {
            return Err(Error::InvalidModel("volume quantum delta_x must be positive".into()));
        }
        if self.zeta < 1 {
            return Err(Error::InvalidModel("pump multiple zeta must be >= 1".into()));
        }
        if !(self.n_p < self.n_s && self.n_s < self.n) {
            return Err(Error::InvalidModel(format!(
                "band ordering violated: need n_p < n_s < n, got n_p={}, n_s={}, n={}",
                self.n_p, self.n_s, self.n
            )));
        }
        if self.n_r > self.n {
            return Err(Error::InvalidModel(format!(
                "penalty ceiling n_r={} exceeds n={}",
                self.n_r, self.n
            )));
        }
        Ok(())
    }

    /// Number of states `(n + 1) * T`.
    pub fn state_count(&self) -> usize {
        (self.n + 1) * self.period_t
    }

    /// Width of the threshold band, `n_s - n_p`.
    pub fn band_width(&self) -> usize {
        self.n_s - self.n_p
    }

    /// Tank volume represented by this spec.
    pub fn volume(&self) -> f64 {
        self.n as f64 * self.delta_x
    }
}

/// Price thresholds for every threshold-band state.
///
/// `thresholds[kappa][i - n_p - 1]` is the threshold at volume index `i`,
/// phase `kappa`, in currency/MWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub thresholds: Vec<Vec<f64>>,
}

impl ThresholdPolicy {
    pub fn new(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        if thresholds.is_empty() || thresholds[0].is_empty() {
            return Err(Error::InvalidModel("threshold policy must be non-empty".into()));
        }
        let width = thresholds[0].len();
        if thresholds.iter().any(|row| row.len() != width) {
            return Err(Error::InvalidModel("threshold rows must have equal length".into()));
        }
        if thresholds.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel("thresholds must be finite".into()));
        }
        Ok(Self { thresholds })
    }

    /// State-independent policy: the same threshold for every band state.
    pub fn uniform(alpha: f64, spec: &ChainSpec) -> Result<Self> {
        Self::new(vec![vec![alpha; spec.band_width()]; spec.period_t])
    }

    /// Policy from a flat vector laid out phase-major, as used by the optimizer.
    pub fn from_flat(flat: &[f64], spec: &ChainSpec) -> Result<Self> {
        let width = spec.band_width();
        if flat.len() != width * spec.period_t {
            return Err(Error::DimensionMismatch(format!(
                "flat policy has {} entries, expected {} ({} phases x band {})",
                flat.len(),
                width * spec.period_t,
                spec.period_t,
                width
            )));
        }
        Self::new(flat.chunks(width).map(<[f64]>::to_vec).collect())
    }

    pub fn check_dims(&self, spec: &ChainSpec) -> Result<()> {
        if self.thresholds.len() != spec.period_t
            || self.thresholds.iter().any(|row| row.len() != spec.band_width())
        {
            return Err(Error::DimensionMismatch(format!(
                "policy is {}x{}, spec needs {}x{}",
                self.thresholds.len(),
                self.thresholds.first().map_or(0, Vec::len),
                spec.period_t,
                spec.band_width()
            )));
        }
        Ok(())
    }

    /// Threshold for band state `(i, kappa)`; `i` must satisfy `n_p < i <= n_s`.
    pub fn alpha_at(&self, i: usize, kappa: usize, spec: &ChainSpec) -> f64 {
        self.thresholds[kappa][i - spec.n_p - 1]
    }
}

/// Capital cost of the storage tank as a function of its size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapitalCost {
    /// Linear cost per unit volume.
    PerUnit(f64),
    /// Explicit (size, cost) table; lookups require an exact size match.
    Table(Vec<(f64, f64)>),
}

impl CapitalCost {
    pub fn validate(&self) -> Result<()> {
        match self {
            CapitalCost::PerUnit(c) => {
                if !c.is_finite() || *c < 0.0 {
                    return Err(Error::InvalidModel("per-unit capital cost must be >= 0".into()));
                }
            }
            CapitalCost::Table(rows) => {
                if rows.is_empty() {
                    return Err(Error::InvalidModel("capital cost table is empty".into()));
                }
                for pair in rows.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        return Err(Error::InvalidModel(
                            "capital cost table sizes must be strictly increasing".into(),
                        ));
                    }
                    if pair[1].1 < pair[0].1 {
                        return Err(Error::InvalidModel(
                            "capital cost must be nondecreasing in tank size".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Capital cost of a tank of size `v`.
    pub fn capital_for(&self, v: f64) -> Result<f64> {
        match self {
            CapitalCost::PerUnit(c) => Ok(c * v),
            CapitalCost::Table(rows) => rows
                .iter()
                .find(|(size, _)| (size - v).abs() <= GRID_TOL * size.abs().max(1.0))
                .map(|(_, cost)| *cost)
                .ok_or_else(|| {
                    Error::InvalidModel(format!("no capital cost table entry for tank size {v}"))
                }),
        }
    }
}

/// Operating-cost parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Energy consumed per interval while the pump runs, MWh.
    pub eps_p: f64,
    /// Penalty per interval spent at or below `n_r * delta_x`.
    pub penalty_w: f64,
    pub capital_cost: CapitalCost,
}

impl CostParams {
    pub fn new(eps_p: f64, penalty_w: f64, capital_cost: CapitalCost) -> Result<Self> {
        let params = Self { eps_p, penalty_w, capital_cost };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_p > 0.0) || !self.eps_p.is_finite() {
            return Err(Error::InvalidModel("pumping energy eps_p must be > 0".into()));
        }
        if self.penalty_w < 0.0 || !self.penalty_w.is_finite() {
            return Err(Error::InvalidModel("penalty must be >= 0".into()));
        }
        self.capital_cost.validate()
    }
}

/// Outcome of one named validation check.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail report over every instance invariant.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn failure_summary(&self) -> String {
        self.failures()
            .iter()
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect::<Vec<_>>()
            .join("; ")
    }

    /// Converts a failing report into an error; passing reports yield `Ok`.
    pub fn into_result(self) -> Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(self.failure_summary()))
        }
    }
}

/// Checks every assumption the chain construction relies on.
///
/// The overflow and underflow guards use the effective demand support: a
/// pump step from the band top must not exceed the tank under the smallest
/// possible demand, and a no-pump step from above the enforced band must not
/// go below empty under the largest possible demand.
pub fn validate_instance(
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
) -> ValidationReport {
    let mut checks = Vec::new();
    let mut push = |name: &'static str, passed: bool, detail: String| {
        checks.push(Check { name, passed, detail });
    };

    let demand_ok = demand.validate();
    push(
        "demand dimensions",
        demand.period_t >= 1
            && demand.levels_m >= 1
            && demand.probs.len() == demand.period_t
            && demand.probs.iter().all(|r| r.len() == demand.levels_m),
        format!("T={}, m={}", demand.period_t, demand.levels_m),
    );
    push(
        "demand probability nonnegative",
        demand.probs.iter().flatten().all(|p| p.is_finite() && *p >= 0.0),
        "every level probability must be finite and >= 0".into(),
    );
    let row_sums: Vec<f64> = demand.probs.iter().map(|r| r.iter().sum()).collect();
    push(
        "probability normalization",
        row_sums.iter().all(|s| (s - 1.0).abs() <= PROB_SUM_TOL),
        format!("per-phase level probabilities must sum to 1, got {row_sums:?}"),
    );

    let price_ok = price.validate();
    push("price parameters", price_ok.is_ok(), match price.validate() {
        Ok(()) => "finite means, positive standard deviations".into(),
        Err(e) => e.to_string(),
    });

    let spec_ok = spec.validate();
    push("band ordering", spec_ok.is_ok(), match spec.validate() {
        Ok(()) => format!("n_p={} < n_s={} < n={}", spec.n_p, spec.n_s, spec.n),
        Err(e) => e.to_string(),
    });

    push(
        "period agreement",
        demand.period_t == price.period_t && price.period_t == spec.period_t,
        format!(
            "demand T={}, price T={}, chain T={}",
            demand.period_t, price.period_t, spec.period_t
        ),
    );

    if demand_ok.is_ok() && spec_ok.is_ok() {
        let (tau_min, tau_max) = demand.support_bounds();
        let top = spec.n_s + spec.zeta;
        push(
            "overflow guard",
            top <= spec.n + tau_min,
            format!(
                "pumping from the band top must stay in the tank: n_s + zeta - tau_min = {} must be <= n = {}",
                top as i64 - tau_min as i64,
                spec.n
            ),
        );
        push(
            "underflow guard",
            spec.n_p + 1 >= tau_max,
            format!(
                "a no-pump step from just above the enforced band must stay nonnegative: n_p + 1 - tau_max = {}",
                spec.n_p as i64 + 1 - tau_max as i64
            ),
        );
    }

    ValidationReport { checks }
}

/// Rounds each demand sample to the nearest multiple of `quantum_d` (ties
/// away from zero) and estimates per-phase level frequencies.
pub fn quantize_demand_series(
    series: &[Sample],
    quantum_d: f64,
    period_t: usize,
) -> Result<QuantizedDemandModel> {
    if series.is_empty() {
        return Err(Error::InvalidModel("demand series is empty".into()));
    }
    if !(quantum_d > 0.0) || !quantum_d.is_finite() {
        return Err(Error::InvalidModel("demand quantum must be positive".into()));
    }
    if period_t < 1 {
        return Err(Error::InvalidModel("period T must be >= 1".into()));
    }

    let mut levels = Vec::with_capacity(series.len());
    let mut max_level = 0usize;
    for sample in series {
        if !sample.value.is_finite() {
            return Err(Error::Parse(format!(
                "demand sample at index {} is not finite",
                sample.index
            )));
        }
        // f64::round ties away from zero, the chosen quantization rule.
        let tau = (sample.value / quantum_d).round();
        if tau < 0.0 {
            return Err(Error::InvalidModel(format!(
                "demand sample {} at index {} quantizes to a negative level",
                sample.value, sample.index
            )));
        }
        let tau = tau as usize;
        max_level = max_level.max(tau);
        let kappa = sample.index.rem_euclid(period_t as i64) as usize;
        levels.push((kappa, tau));
    }

    let levels_m = max_level + 1;
    let mut counts = vec![vec![0u64; levels_m]; period_t];
    for (kappa, tau) in levels {
        counts[kappa][tau] += 1;
    }

    let mut probs = Vec::with_capacity(period_t);
    for (kappa, row) in counts.iter().enumerate() {
        let total: u64 = row.iter().sum();
        if total == 0 {
            return Err(Error::InsufficientData(format!("no demand samples for phase {kappa}")));
        }
        probs.push(row.iter().map(|c| *c as f64 / total as f64).collect());
    }

    QuantizedDemandModel::new(quantum_d, probs)
}

/// Estimates per-phase Gaussian price parameters, dropping samples whose
/// price exceeds `extreme_cutoff`.
pub fn estimate_price_model(
    series: &[Sample],
    period_t: usize,
    extreme_cutoff: f64,
) -> Result<PriceModel> {
    if series.is_empty() {
        return Err(Error::InvalidModel("price series is empty".into()));
    }
    if !(extreme_cutoff > 0.0) {
        return Err(Error::InvalidModel("extreme-price cutoff must be positive".into()));
    }
    if period_t < 1 {
        return Err(Error::InvalidModel("period T must be >= 1".into()));
    }

    let mut by_phase = vec![Vec::new(); period_t];
    for sample in series {
        if sample.value > extreme_cutoff {
            continue;
        }
        let kappa = sample.index.rem_euclid(period_t as i64) as usize;
        by_phase[kappa].push(sample.value);
    }

    let mut mean = Vec::with_capacity(period_t);
    let mut std = Vec::with_capacity(period_t);
    for (kappa, values) in by_phase.iter().enumerate() {
        if values.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "phase {kappa} has {} samples after filtering, need at least 2",
                values.len()
            )));
        }
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        // Sample standard deviation with the n-1 denominator.
        let var = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma = var.sqrt();
        if !(sigma > 0.0) {
            return Err(Error::InsufficientData(format!(
                "phase {kappa} has zero price variance; a Gaussian price model needs sigma > 0"
            )));
        }
        mean.push(mu);
        std.push(sigma);
    }

    PriceModel::new(mean, std)
}

/// How a candidate tank size maps onto the integer volume grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VolumeRounding {
    /// Require the size to be an integer multiple of `delta_x`.
    #[default]
    Exact,
    /// Use the largest grid volume not exceeding the size.
    Floor,
}

/// Rule for deriving the control band from the tank size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandRule {
    /// `n_p` fixed, `n_s = n - top_margin`.
    FixedOffsets { n_p: usize, top_margin: usize },
    /// `n_p = tau_max - 1`, `n_s = n - tau_max` from the demand support.
    FromDemandSupport,
}

/// Turns a candidate tank size into a full [`ChainSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRule {
    pub delta_x: f64,
    pub zeta: usize,
    #[serde(rename = "period_T")]
    pub period_t: usize,
    #[serde(default)]
    pub n_r: usize,
    pub band: BandRule,
    #[serde(default)]
    pub rounding: VolumeRounding,
}

impl GeometryRule {
    pub fn chain_spec_for(&self, v: f64, demand: &QuantizedDemandModel) -> Result<ChainSpec> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidModel(format!("tank size must be positive, got {v}")));
        }
        let steps = v / self.delta_x;
        let n = match self.rounding {
            VolumeRounding::Exact => {
                let n = steps.round();
                if (steps - n).abs() > GRID_TOL * steps.abs().max(1.0) {
                    return Err(Error::InvalidModel(format!(
                        "tank size {v} is not a multiple of delta_x = {}",
                        self.delta_x
                    )));
                }
                n as usize
            }
            VolumeRounding::Floor => (steps + GRID_TOL).floor() as usize,
        };
        let (n_p, n_s) = match &self.band {
            BandRule::FixedOffsets { n_p, top_margin } => {
                if n <= n_p + top_margin {
                    return Err(Error::InvalidModel(format!(
                        "tank size {v} (n = {n}) is too small for band offsets n_p={n_p}, top_margin={top_margin}"
                    )));
                }
                (*n_p, n - top_margin)
            }
            BandRule::FromDemandSupport => {
                let (_, tau_max) = demand.support_bounds();
                if tau_max < 1 {
                    return Err(Error::InvalidModel(
                        "demand support must include a positive level to derive the band".into(),
                    ));
                }
                if n <= 2 * tau_max - 1 {
                    return Err(Error::InvalidModel(format!(
                        "tank size {v} (n = {n}) is too small for demand support max {tau_max}"
                    )));
                }
                (tau_max - 1, n - tau_max)
            }
        };
        ChainSpec::new(n, n_p, n_s, self.n_r, self.zeta, self.delta_x, self.period_t)
    }
}

/// Serialized bundle of model parameters, the `fit` pipeline's output format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub demand: QuantizedDemandModel,
    pub price: PriceModel,
    pub chain_spec: Option<ChainSpec>,
    pub cost_params: Option<CostParams>,
}

impl ModelDocument {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(raw: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(raw)?;
        doc.demand.validate()?;
        doc.price.validate()?;
        if let Some(spec) = &doc.chain_spec {
            spec.validate()?;
        }
        if let Some(params) = &doc.cost_params {
            params.validate()?;
        }
        Ok(doc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_demand() -> QuantizedDemandModel {
        QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap()
    }

    fn example1_spec() -> ChainSpec {
        ChainSpec::new(8, 0, 7, 0, 2, 1.0, 1).unwrap()
    }

    fn example1_price() -> PriceModel {
        PriceModel::single_phase(20.0, 10.0).unwrap()
    }

    #[test]
    fn example1_instance_passes_validation() {
        let report = validate_instance(&example1_demand(), &example1_price(), &example1_spec());
        assert!(report.passed(), "failures: {}", report.failure_summary());
    }

    #[test]
    fn overflow_guard_fails_by_one() {
        // Zero demand has positive probability, so the guard is the literal
        // n_s + zeta <= n; push it over by one.
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.5, 0.5]]).unwrap();
        let price = example1_price();
        let spec = ChainSpec::new(8, 0, 7, 0, 2, 1.0, 1).unwrap();
        let report = validate_instance(&demand, &price, &spec);
        assert!(!report.passed());
        assert!(report.failures().iter().any(|c| c.name == "overflow guard"));
    }

    #[test]
    fn unnormalized_demand_row_fails() {
        let demand = QuantizedDemandModel {
            quantum_d: 1.0,
            levels_m: 2,
            period_t: 1,
            probs: vec![vec![0.4, 0.5]],
        };
        let report = validate_instance(&demand, &example1_price(), &example1_spec());
        assert!(!report.passed());
        assert!(report.failures().iter().any(|c| c.name == "probability normalization"));
    }

    #[test]
    fn quantize_constant_series() {
        let series: Vec<Sample> =
            (0..10).map(|k| Sample { index: k, value: 1.0 }).collect();
        let model = quantize_demand_series(&series, 1.0, 1).unwrap();
        assert_eq!(model.levels_m, 2);
        assert_eq!(model.probs, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn quantize_uniform_five_levels() {
        // 0.8..1.2 cycled uniformly with quantum 0.1: levels 8..12 at 0.2 each.
        let values = [0.8, 0.9, 1.0, 1.1, 1.2];
        let series: Vec<Sample> = (0..100)
            .map(|k| Sample { index: k, value: values[k as usize % 5] })
            .collect();
        let model = quantize_demand_series(&series, 0.1, 1).unwrap();
        assert_eq!(model.levels_m, 13);
        for tau in 0..13 {
            let expected = if (8..=12).contains(&tau) { 0.2 } else { 0.0 };
            assert!((model.probs[0][tau] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn quantize_alternating_phases_are_one_hot() {
        // 48 hourly samples alternating between levels 2 and 3 with T=24:
        // even phases always see level 2, odd phases level 3.
        let series: Vec<Sample> = (0..48)
            .map(|k| Sample { index: k, value: if k % 2 == 0 { 2.0 } else { 3.0 } })
            .collect();
        let model = quantize_demand_series(&series, 1.0, 24).unwrap();
        assert_eq!(model.levels_m, 4);
        for kappa in 0..24 {
            let expected_tau = if kappa % 2 == 0 { 2 } else { 3 };
            for tau in 0..4 {
                let expected = if tau == expected_tau { 1.0 } else { 0.0 };
                assert_eq!(model.probs[kappa][tau], expected);
            }
        }
    }

    #[test]
    fn quantize_missing_phase_is_an_error() {
        let series = vec![Sample { index: 0, value: 1.0 }, Sample { index: 2, value: 1.0 }];
        let err = quantize_demand_series(&series, 1.0, 2).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn price_two_points() {
        let series =
            vec![Sample { index: 0, value: 10.0 }, Sample { index: 1, value: 30.0 }];
        let model = estimate_price_model(&series, 1, 500.0).unwrap();
        assert!((model.mean[0] - 20.0).abs() < 1e-12);
        assert!((model.std[0] - 200f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn price_extreme_sample_is_filtered() {
        let series = vec![
            Sample { index: 0, value: 10.0 },
            Sample { index: 1, value: 30.0 },
            Sample { index: 2, value: 900.0 },
        ];
        let filtered = estimate_price_model(&series, 1, 500.0).unwrap();
        let reference = estimate_price_model(&series[..2], 1, 500.0).unwrap();
        assert_eq!(filtered, reference);
    }

    #[test]
    fn price_degenerate_variance_is_an_error() {
        let series: Vec<Sample> =
            (0..5).map(|k| Sample { index: k, value: 20.0 }).collect();
        let err = estimate_price_model(&series, 1, 500.0).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn geometry_rule_example3() {
        let demand = QuantizedDemandModel::new(
            0.1,
            vec![vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.2, 0.2, 0.2, 0.2]],
        )
        .unwrap();
        let rule = GeometryRule {
            delta_x: 0.1,
            zeta: 20,
            period_t: 1,
            n_r: 0,
            band: BandRule::FixedOffsets { n_p: 12, top_margin: 12 },
            rounding: VolumeRounding::Exact,
        };
        let spec = rule.chain_spec_for(9.6, &demand).unwrap();
        assert_eq!((spec.n, spec.n_p, spec.n_s), (96, 12, 84));
        let report = validate_instance(&demand, &PriceModel::single_phase(20.0, 10.0).unwrap(), &spec);
        assert!(report.passed(), "failures: {}", report.failure_summary());
    }

    #[test]
    fn geometry_rule_floor_rounding() {
        let demand = QuantizedDemandModel::new(
            0.1548,
            vec![vec![0.0, 0.5, 0.5]],
        )
        .unwrap();
        let rule = GeometryRule {
            delta_x: 0.1548,
            zeta: 5,
            period_t: 1,
            n_r: 0,
            band: BandRule::FromDemandSupport,
            rounding: VolumeRounding::Floor,
        };
        // 10 / 0.1548 = 64.599..., floor to 64.
        let spec = rule.chain_spec_for(10.0, &demand).unwrap();
        assert_eq!(spec.n, 64);
        assert_eq!(spec.n_p, 1);
        assert_eq!(spec.n_s, 62);
    }

    #[test]
    fn capital_cost_table_lookup() {
        let table = CapitalCost::Table(vec![(3.0, 100.0), (5.0, 200.0)]);
        table.validate().unwrap();
        assert_eq!(table.capital_for(5.0).unwrap(), 200.0);
        assert!(table.capital_for(4.0).is_err());
    }
}
