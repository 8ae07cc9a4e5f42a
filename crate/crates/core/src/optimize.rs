//! Derivative-free optimization of the threshold policy and the co-design
//! sweep over candidate tank sizes.
//!
//! The workhorse is simultaneous perturbation stochastic approximation:
//! each iteration estimates the gradient from two objective evaluations
//! under a random Bernoulli perturbation, then takes a projected gain step.
//! The best-seen iterate is tracked (and optionally refined by a
//! deterministic compass search) rather than returning the last iterate.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{
    build_chain, build_chain_trusted, ensure_unique_closed_class, stationary,
    stationary_presumed_unichain,
};
use crate::cost::{closed_form_applies, example1_operating_cost, expected_operating_cost};
use crate::error::{Error, Result};
use crate::model::{
    validate_instance, CostParams, GeometryRule, PriceModel, QuantizedDemandModel, ThresholdPolicy,
};

/// Large odd constant for deriving independent per-restart and per-candidate
/// seeds from one base seed.
const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Relative tolerance under which two candidate totals count as tied.
const TIE_TOL: f64 = 1e-9;

/// Gain-sequence and search-box parameters for [`spsa_minimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpsaConfig {
    pub iterations: usize,
    /// Step-size numerator; `None` calibrates it from probe gradients so the
    /// first step moves roughly half a currency unit per coordinate.
    pub a0: Option<f64>,
    /// Perturbation-size numerator.
    pub c0: f64,
    /// Step-size stability offset; `None` uses 10% of the iteration count.
    #[serde(rename = "A")]
    pub big_a: Option<f64>,
    /// Step-size decay exponent, in (0.5, 1].
    pub alpha_exp: f64,
    /// Perturbation decay exponent, in (0, 0.5].
    pub gamma_exp: f64,
    pub box_lo: f64,
    pub box_hi: f64,
    pub seed: u64,
    pub restarts: usize,
    /// Objective-evaluation budget for the deterministic compass-search
    /// refinement of the best SPSA iterate; 0 disables it.
    pub polish_evals: usize,
}

impl SpsaConfig {
    /// Defaults derived from the price model: perturbations scaled to a
    /// tenth of the mean price deviation, search box five deviations wide.
    pub fn for_price_model(iterations: usize, seed: u64, price: &PriceModel) -> Self {
        let mean_sigma = price.std.iter().sum::<f64>() / price.std.len() as f64;
        let max_sigma = price.std.iter().cloned().fold(f64::MIN, f64::max);
        let min_mu = price.mean.iter().cloned().fold(f64::MAX, f64::min);
        let max_mu = price.mean.iter().cloned().fold(f64::MIN, f64::max);
        Self {
            iterations,
            a0: None,
            c0: 0.1 * mean_sigma,
            big_a: None,
            alpha_exp: 0.602,
            gamma_exp: 0.101,
            box_lo: min_mu - 5.0 * max_sigma,
            box_hi: max_mu + 5.0 * max_sigma,
            seed,
            restarts: 5,
            polish_evals: 6_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::InvalidModel("spsa needs at least one iteration".into()));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::InvalidModel("spsa perturbation c0 must be > 0".into()));
        }
        if !(self.box_lo < self.box_hi) {
            return Err(Error::InvalidModel("spsa box must satisfy box_lo < box_hi".into()));
        }
        if !(self.alpha_exp > 0.5 && self.alpha_exp <= 1.0) {
            return Err(Error::InvalidModel("alpha_exp must lie in (0.5, 1]".into()));
        }
        if !(self.gamma_exp > 0.0 && self.gamma_exp <= 0.5) {
            return Err(Error::InvalidModel("gamma_exp must lie in (0, 0.5]".into()));
        }
        if self.restarts < 1 {
            return Err(Error::InvalidModel("spsa needs at least one restart".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn stability_offset(&self) -> f64 {
        self.big_a.unwrap_or(0.1 * self.iterations as f64).max(1.0)
    }
}

fn clamp_to_box(theta: &mut [f64], lo: f64, hi: f64) {
    for value in theta.iter_mut() {
        *value = value.clamp(lo, hi);
    }
}

struct RestartOutcome {
    point: Vec<f64>,
    value: f64,
}

fn spsa_restart<F: Fn(&[f64]) -> f64>(
    objective: &F,
    start: &[f64],
    config: &SpsaConfig,
    seed: u64,
) -> std::result::Result<RestartOutcome, String> {
    let dim = start.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let big_a = config.stability_offset();

    let mut theta = start.to_vec();
    clamp_to_box(&mut theta, config.box_lo, config.box_hi);
    let start_value = objective(&theta);
    if start_value.is_nan() {
        return Err("objective returned NaN at the start point".into());
    }
    let mut best_point = theta.clone();
    let mut best_value = start_value;

    // Calibrate a0 so that a_0 * |g| is about half a currency unit per
    // coordinate; with Bernoulli perturbations every coordinate of one
    // gradient estimate shares the magnitude |y+ - y-| / (2 c0).
    let a0 = match config.a0 {
        Some(a0) => a0,
        None => {
            let mut magnitude_sum = 0.0;
            let probes = 3;
            for _ in 0..probes {
                let delta: Vec<f64> =
                    (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
                let mut up = theta.clone();
                let mut down = theta.clone();
                for j in 0..dim {
                    up[j] += config.c0 * delta[j];
                    down[j] -= config.c0 * delta[j];
                }
                clamp_to_box(&mut up, config.box_lo, config.box_hi);
                clamp_to_box(&mut down, config.box_lo, config.box_hi);
                let (y_up, y_down) = (objective(&up), objective(&down));
                if y_up.is_finite() && y_down.is_finite() {
                    magnitude_sum += (y_up - y_down).abs() / (2.0 * config.c0);
                }
            }
            let floor = (0.01 * start_value.abs().max(1e-9)
                / (config.box_hi - config.box_lo))
                .max(1e-12);
            let magnitude = (magnitude_sum / probes as f64).max(floor);
            0.5 * (big_a + 1.0).powf(config.alpha_exp) / magnitude
        }
    };

    for k in 0..config.iterations {
        let a_k = a0 / (big_a + k as f64 + 1.0).powf(config.alpha_exp);
        let c_k = config.c0 / (k as f64 + 1.0).powf(config.gamma_exp);
        let delta: Vec<f64> =
            (0..dim).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();

        let mut up = theta.clone();
        let mut down = theta.clone();
        for j in 0..dim {
            up[j] += c_k * delta[j];
            down[j] -= c_k * delta[j];
        }
        clamp_to_box(&mut up, config.box_lo, config.box_hi);
        clamp_to_box(&mut down, config.box_lo, config.box_hi);
        let y_up = objective(&up);
        let y_down = objective(&down);
        if y_up.is_nan() || y_down.is_nan() {
            return Err(format!("objective returned NaN at iteration {k}"));
        }
        if !y_up.is_finite() || !y_down.is_finite() {
            // Rejected point (e.g. a reducible chain): keep the iterate.
            continue;
        }

        let slope = (y_up - y_down) / (2.0 * c_k);
        for j in 0..dim {
            theta[j] -= a_k * slope / delta[j];
        }
        clamp_to_box(&mut theta, config.box_lo, config.box_hi);

        let value = objective(&theta);
        if value.is_nan() {
            return Err(format!("objective returned NaN at iterate {k}"));
        }
        if value < best_value {
            best_value = value;
            best_point.copy_from_slice(&theta);
        }
    }

    if !best_value.is_finite() {
        return Err("no finite objective value seen".into());
    }
    Ok(RestartOutcome { point: best_point, value: best_value })
}

/// Deterministic compass-search refinement: coordinate steps with a
/// halving radius, spending at most `budget` objective evaluations.
fn compass_polish<F: Fn(&[f64]) -> f64>(
    objective: &F,
    point: &mut Vec<f64>,
    value: &mut f64,
    config: &SpsaConfig,
    budget: usize,
) {
    if budget == 0 {
        return;
    }
    let mut evals = 0;
    let mut step = config.c0.max(1e-6);
    let min_step = 1e-4;
    while step > min_step && evals < budget {
        let mut improved = false;
        for j in 0..point.len() {
            for direction in [step, -step] {
                if evals >= budget {
                    return;
                }
                let original = point[j];
                let candidate = (original + direction).clamp(config.box_lo, config.box_hi);
                if candidate == original {
                    continue;
                }
                point[j] = candidate;
                let y = objective(point);
                evals += 1;
                if y.is_finite() && y < *value {
                    *value = y;
                    improved = true;
                    break;
                }
                point[j] = original;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
}

/// Minimizes `objective` over the box starting from `start`.
///
/// Runs `restarts` independent SPSA passes with derived seeds and returns
/// the best point seen across all of them. A restart aborts (and is
/// reported) if the objective returns NaN; infinite values only reject the
/// current step.
pub fn spsa_minimize<F: Fn(&[f64]) -> f64>(
    objective: F,
    start: &[f64],
    config: &SpsaConfig,
) -> Result<(Vec<f64>, f64)> {
    config.validate()?;
    if start.is_empty() {
        return Err(Error::InvalidModel("spsa needs at least one dimension".into()));
    }

    let mut best: Option<RestartOutcome> = None;
    let mut failures = Vec::new();
    for restart in 0..config.restarts {
        let seed = config.seed.wrapping_add((restart as u64).wrapping_mul(SEED_STRIDE));
        match spsa_restart(&objective, start, config, seed) {
            Ok(outcome) => {
                if best.as_ref().is_none_or(|b| outcome.value < b.value) {
                    best = Some(outcome);
                }
            }
            Err(reason) => failures.push(format!("restart {restart}: {reason}")),
        }
    }

    let mut best = best.ok_or_else(|| {
        Error::Optimization(format!("all restarts aborted: {}", failures.join("; ")))
    })?;
    compass_polish(&objective, &mut best.point, &mut best.value, config, config.polish_evals);
    Ok((best.point, best.value))
}

/// How thresholds vary over the band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PolicyForm {
    /// One shared threshold for every band state.
    Scalar,
    /// An independent threshold per `(volume, phase)` band state.
    #[default]
    PerState,
}

/// Optimizes the threshold policy for one candidate tank size and returns it
/// with its expected operating cost per interval.
pub fn optimize_policy_for_tank(
    v: f64,
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    rule: &GeometryRule,
    params: &CostParams,
    spsa: &SpsaConfig,
    form: PolicyForm,
) -> Result<(ThresholdPolicy, f64)> {
    let spec = rule.chain_spec_for(v, demand)?;
    validate_instance(demand, price, &spec).into_result()?;

    let dim = match form {
        PolicyForm::Scalar => 1,
        PolicyForm::PerState => spec.band_width() * spec.period_t,
    };
    let start: Vec<f64> = match form {
        PolicyForm::Scalar => vec![price.mean.iter().sum::<f64>() / price.mean.len() as f64],
        PolicyForm::PerState => (0..spec.period_t)
            .flat_map(|kappa| std::iter::repeat(price.mean[kappa]).take(spec.band_width()))
            .collect(),
    };
    debug_assert_eq!(start.len(), dim);

    let to_policy = |theta: &[f64]| -> Result<ThresholdPolicy> {
        match form {
            PolicyForm::Scalar => ThresholdPolicy::uniform(theta[0], &spec),
            PolicyForm::PerState => ThresholdPolicy::from_flat(theta, &spec),
        }
    };

    let closed_form = form == PolicyForm::Scalar && closed_form_applies(demand, &spec);
    if !closed_form {
        // The positive-entry pattern is the same for every policy whose pump
        // probabilities stay strictly inside (0, 1); checking the start
        // policy once covers all such evaluations below.
        let start_chain = build_chain(demand, price, &spec, &to_policy(&start)?)?;
        ensure_unique_closed_class(&start_chain)?;
    }

    // Pump probabilities are provably inside (0, 1) in double precision for
    // thresholds within eight deviations of the phase mean.
    let in_interior = |theta: &[f64]| -> bool {
        theta.iter().enumerate().all(|(index, alpha)| {
            let check = |kappa: usize| {
                (alpha - price.mean[kappa]).abs() <= 8.0 * price.std[kappa]
            };
            match form {
                PolicyForm::Scalar => (0..spec.period_t).all(check),
                PolicyForm::PerState => check(index / spec.band_width()),
            }
        })
    };

    let objective = |theta: &[f64]| -> f64 {
        if closed_form {
            return example1_operating_cost(theta[0], spec.n, price, params)
                .unwrap_or(f64::INFINITY);
        }
        let Ok(policy) = to_policy(theta) else { return f64::INFINITY };
        let chain = build_chain_trusted(demand, price, &spec, &policy);
        let solved = if in_interior(theta) {
            stationary_presumed_unichain(&chain)
        } else {
            stationary(&chain)
        };
        let Ok(pi) = solved else { return f64::INFINITY };
        expected_operating_cost(&pi, &policy, price, &spec, params)
            .map_or(f64::INFINITY, |b| b.total_per_interval)
    };

    let (best, value) = spsa_minimize(objective, &start, spsa)?;
    if !value.is_finite() {
        return Err(Error::Optimization(format!(
            "no feasible policy found for tank size {v}"
        )));
    }
    Ok((to_policy(&best)?, value))
}

/// Outcome for one candidate tank size in the sweep.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateOutcome {
    pub v: f64,
    pub policy: ThresholdPolicy,
    pub capital: f64,
    /// Expected operating cost accumulated over the planning horizon.
    pub operating_n: f64,
    /// Capital plus operating: the co-design total `J`.
    pub total: f64,
}

/// Result of the sweep over candidate tank sizes.
#[derive(Debug, Clone, Serialize)]
pub struct CoDesignResult {
    pub best_v: f64,
    pub best_policy: ThresholdPolicy,
    pub j_star: f64,
    pub per_candidate: Vec<CandidateOutcome>,
    /// Candidates that failed to evaluate, with reasons.
    pub failures: Vec<(f64, String)>,
}

/// Optimizes the policy for every candidate tank size and picks the size
/// minimizing capital plus expected operating cost over `n_intervals`.
///
/// Candidates are evaluated independently (in parallel) with per-candidate
/// seeds derived from the base seed, so results do not depend on scheduling.
/// Ties within a relative 1e-9 go to the smaller tank.
#[allow(clippy::too_many_arguments)]
pub fn codesign_sweep(
    candidates: &[f64],
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    rule: &GeometryRule,
    params: &CostParams,
    n_intervals: u64,
    spsa: &SpsaConfig,
    form: PolicyForm,
) -> Result<CoDesignResult> {
    if candidates.is_empty() {
        return Err(Error::InvalidModel("codesign sweep needs at least one candidate".into()));
    }

    let evaluations: Vec<(f64, Result<CandidateOutcome>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(index, &v)| {
            let config =
                spsa.with_seed(spsa.seed.wrapping_add((index as u64 + 1).wrapping_mul(SEED_STRIDE)));
            let outcome = (|| {
                let capital = params.capital_cost.capital_for(v)?;
                let (policy, per_interval) =
                    optimize_policy_for_tank(v, demand, price, rule, params, &config, form)?;
                let operating_n = n_intervals as f64 * per_interval;
                Ok(CandidateOutcome { v, policy, capital, operating_n, total: capital + operating_n })
            })();
            (v, outcome)
        })
        .collect();

    let mut per_candidate = Vec::new();
    let mut failures = Vec::new();
    for (v, outcome) in evaluations {
        match outcome {
            Ok(result) => per_candidate.push(result),
            Err(e) => failures.push((v, e.to_string())),
        }
    }
    if per_candidate.is_empty() {
        let summary = failures
            .iter()
            .map(|(v, e)| format!("V={v}: {e}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(Error::AllCandidatesFailed(summary));
    }

    let j_min = per_candidate.iter().map(|c| c.total).fold(f64::INFINITY, f64::min);
    let tie_band = j_min + TIE_TOL * j_min.abs().max(1.0);
    let best = per_candidate
        .iter()
        .filter(|c| c.total <= tie_band)
        .min_by(|a, b| a.v.total_cmp(&b.v))
        .expect("at least one candidate within the tie band");

    Ok(CoDesignResult {
        best_v: best.v,
        best_policy: best.policy.clone(),
        j_star: best.total,
        per_candidate,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BandRule, CapitalCost, VolumeRounding};

    fn quad_config(seed: u64) -> SpsaConfig {
        SpsaConfig {
            iterations: 2000,
            a0: None,
            c0: 0.5,
            big_a: None,
            alpha_exp: 0.602,
            gamma_exp: 0.101,
            box_lo: 0.0,
            box_hi: 40.0,
            seed,
            restarts: 2,
            polish_evals: 4000,
        }
    }

    #[test]
    fn quadratic_minimum_recovered() {
        let target = [18.0, 22.0, 19.0, 21.0, 20.0];
        let objective = |theta: &[f64]| -> f64 {
            theta.iter().zip(&target).map(|(t, c)| (t - c).powi(2)).sum()
        };
        let start = vec![10.0; 5];
        let (best, value) = spsa_minimize(objective, &start, &quad_config(7)).unwrap();
        for (b, t) in best.iter().zip(&target) {
            assert!((b - t).abs() < 1e-2, "coordinate {b} vs {t}");
        }
        assert!(value < 1e-3);
    }

    #[test]
    fn iterates_respect_the_box() {
        let config = SpsaConfig { polish_evals: 500, ..quad_config(3) };
        let objective = |theta: &[f64]| -> f64 {
            for t in theta {
                assert!(
                    (config.box_lo..=config.box_hi).contains(t),
                    "evaluation outside the box: {t}"
                );
            }
            theta.iter().map(|t| (t - 39.0).powi(2)).sum()
        };
        let (best, _) = spsa_minimize(objective, &[1.0, 1.0, 1.0], &config).unwrap();
        for b in best {
            assert!((config.box_lo..=config.box_hi).contains(&b));
        }
    }

    #[test]
    fn deterministic_across_runs() {
        let objective =
            |theta: &[f64]| -> f64 { theta.iter().map(|t| (t - 12.3).powi(2)).sum() };
        let config = quad_config(99);
        let a = spsa_minimize(objective, &[5.0, 30.0], &config).unwrap();
        let b = spsa_minimize(objective, &[5.0, 30.0], &config).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn best_seen_is_monotone_in_iteration_count() {
        let objective =
            |theta: &[f64]| -> f64 { theta.iter().map(|t| (t - 25.0).powi(2)).sum() };
        let mut previous = f64::INFINITY;
        for iterations in [50, 100, 200, 400] {
            let config = SpsaConfig {
                iterations,
                a0: Some(0.8),
                big_a: Some(10.0),
                polish_evals: 0,
                restarts: 1,
                ..quad_config(5)
            };
            let (_, value) = spsa_minimize(objective, &[2.0, 2.0, 2.0], &config).unwrap();
            assert!(
                value <= previous + 1e-15,
                "cost rose from {previous} to {value} at {iterations} iterations"
            );
            previous = value;
        }
    }

    #[test]
    fn nan_objective_aborts() {
        let objective = |_: &[f64]| -> f64 { f64::NAN };
        let err = spsa_minimize(objective, &[1.0], &quad_config(1)).unwrap_err();
        assert!(matches!(err, Error::Optimization(_)));
    }

    fn example1_rule() -> GeometryRule {
        GeometryRule {
            delta_x: 1.0,
            zeta: 2,
            period_t: 1,
            n_r: 0,
            band: BandRule::FixedOffsets { n_p: 0, top_margin: 1 },
            rounding: VolumeRounding::Exact,
        }
    }

    fn example1_instance() -> (QuantizedDemandModel, PriceModel, CostParams) {
        (
            QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap(),
            PriceModel::single_phase(20.0, 10.0).unwrap(),
            CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap(),
        )
    }

    #[test]
    fn scalar_threshold_optimum_is_the_mean_price() {
        let (demand, price, params) = example1_instance();
        let spsa = SpsaConfig::for_price_model(2000, 11, &price);
        let (policy, ell) = optimize_policy_for_tank(
            8.0, &demand, &price, &example1_rule(), &params, &spsa, PolicyForm::Scalar,
        )
        .unwrap();
        let alpha = policy.thresholds[0][0];
        assert!((alpha - 20.0).abs() <= 0.2, "alpha* = {alpha}");
        let n = 175_200.0;
        assert!((ell * n - 1_140_421.0).abs() / 1_140_421.0 < 5e-3, "operating {}", ell * n);
    }

    #[test]
    fn sweep_picks_the_known_best_size_and_dominates() {
        let (demand, price, params) = example1_instance();
        let spsa = SpsaConfig::for_price_model(800, 17, &price);
        let candidates: Vec<f64> = (6..=10).map(f64::from).collect();
        let result = codesign_sweep(
            &candidates, &demand, &price, &example1_rule(), &params, 175_200, &spsa,
            PolicyForm::Scalar,
        )
        .unwrap();
        assert_eq!(result.best_v, 8.0);
        assert!(result.failures.is_empty());
        for candidate in &result.per_candidate {
            assert!(result.j_star <= candidate.total + 1e-9);
        }
    }

    #[test]
    fn single_candidate_sweep_matches_direct_evaluation() {
        let (demand, price, params) = example1_instance();
        let spsa = SpsaConfig::for_price_model(400, 23, &price);
        let result = codesign_sweep(
            &[8.0], &demand, &price, &example1_rule(), &params, 175_200, &spsa,
            PolicyForm::Scalar,
        )
        .unwrap();
        assert_eq!(result.per_candidate.len(), 1);
        assert_eq!(result.best_v, 8.0);
        assert_eq!(result.j_star, result.per_candidate[0].total);
    }
}
