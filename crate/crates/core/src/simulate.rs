//! Seeded Monte Carlo simulation of the closed-loop tank dynamics.
//!
//! Prices and demands are drawn from two independent ChaCha streams derived
//! from the run seed, so changing the demand model never perturbs the price
//! draws. Costs accumulate from realized prices, not expectations.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, WeightedIndex};

use crate::chain::{build_chain, stationary, ChainState};
use crate::cost::expected_operating_cost;
use crate::error::{Error, Result};
use crate::model::{validate_instance, ChainSpec, CostParams, PriceModel, QuantizedDemandModel, ThresholdPolicy};

/// Summary of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Time-average realized cost per interval.
    pub w_n: f64,
    /// Visits per `(i, kappa)` state, phase-major flat layout.
    pub visit_counts: Vec<u64>,
    /// Steps that triggered enforced pumping.
    pub enforced_events: u64,
    /// Steps where demand exceeded stored volume and was truncated at empty.
    pub empty_events: u64,
    /// Mean volume per phase, in volume units.
    pub trajectory_summary: Vec<f64>,
    pub seed: u64,
    pub n_steps: u64,
}

/// One simulated interval, exposed to observers for trajectory dumps and
/// transition-frequency checks.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord {
    pub k: u64,
    pub kappa: usize,
    pub i: usize,
    pub price: f64,
    pub demand_tau: usize,
    pub pumped: bool,
    pub cost: f64,
    pub next_i: usize,
}

/// Runs the closed-loop policy for `n_steps` intervals from volume index `x0`.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    policy: &ThresholdPolicy,
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
    n_steps: u64,
    x0: usize,
    seed: u64,
) -> Result<SimResult> {
    simulate_observed(policy, demand, price, spec, params, n_steps, x0, seed, |_| {})
}

/// [`simulate`] with a per-step observer.
#[allow(clippy::too_many_arguments)]
pub fn simulate_observed(
    policy: &ThresholdPolicy,
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
    n_steps: u64,
    x0: usize,
    seed: u64,
    mut observe: impl FnMut(&StepRecord),
) -> Result<SimResult> {
    validate_instance(demand, price, spec).into_result()?;
    policy.check_dims(spec)?;
    if x0 > spec.n {
        return Err(Error::InvalidModel(format!(
            "initial volume index {x0} exceeds n = {}",
            spec.n
        )));
    }
    if n_steps == 0 {
        return Err(Error::InvalidModel("simulation needs at least one step".into()));
    }

    let mut price_rng = ChaCha8Rng::seed_from_u64(seed);
    price_rng.set_stream(0);
    let mut demand_rng = ChaCha8Rng::seed_from_u64(seed);
    demand_rng.set_stream(1);

    let price_dists: Vec<Normal<f64>> = (0..spec.period_t)
        .map(|kappa| {
            Normal::new(price.mean[kappa], price.std[kappa])
                .map_err(|e| Error::InvalidModel(format!("price distribution: {e}")))
        })
        .collect::<Result<_>>()?;
    let demand_dists: Vec<WeightedIndex<f64>> = (0..spec.period_t)
        .map(|kappa| {
            WeightedIndex::new(&demand.probs[kappa])
                .map_err(|e| Error::InvalidModel(format!("demand distribution: {e}")))
        })
        .collect::<Result<_>>()?;

    let n1 = spec.n + 1;
    let mut visit_counts = vec![0u64; n1 * spec.period_t];
    let mut volume_sums = vec![0.0f64; spec.period_t];
    let mut phase_counts = vec![0u64; spec.period_t];
    let mut enforced_events = 0u64;
    let mut empty_events = 0u64;
    let mut total_cost = 0.0f64;
    let mut i = x0;

    for k in 0..n_steps {
        let kappa = (k % spec.period_t as u64) as usize;
        visit_counts[ChainState { i, kappa }.flat(spec.n)] += 1;
        volume_sums[kappa] += i as f64;
        phase_counts[kappa] += 1;

        let r = price_dists[kappa].sample(&mut price_rng);
        let tau = demand_dists[kappa].sample(&mut demand_rng);

        let enforced = i <= spec.n_p;
        let pumped = enforced || (i <= spec.n_s && r <= policy.alpha_at(i, kappa, spec));
        if enforced {
            enforced_events += 1;
        }

        let mut cost = 0.0;
        if pumped {
            cost += params.eps_p * r;
        }
        if i <= spec.n_r {
            cost += params.penalty_w;
        }
        total_cost += cost;

        let inflow = if pumped { spec.zeta } else { 0 };
        let raw_next = i as i64 + inflow as i64 - tau as i64;
        let next_i = if raw_next < 0 {
            empty_events += 1;
            0
        } else {
            debug_assert!(raw_next as usize <= spec.n, "volume overflow at step {k}");
            (raw_next as usize).min(spec.n)
        };

        observe(&StepRecord { k, kappa, i, price: r, demand_tau: tau, pumped, cost, next_i });
        i = next_i;
    }

    let trajectory_summary = volume_sums
        .iter()
        .zip(&phase_counts)
        .map(|(sum, count)| if *count > 0 { sum / *count as f64 * spec.delta_x } else { 0.0 })
        .collect();

    Ok(SimResult {
        w_n: total_cost / n_steps as f64,
        visit_counts,
        enforced_events,
        empty_events,
        trajectory_summary,
        seed,
        n_steps,
    })
}

/// One line of the ergodic-convergence report.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ConvergenceRow {
    pub seed: u64,
    pub n_steps: u64,
    pub x0: usize,
    pub w_n: f64,
    /// `|W_N - expected| / expected`.
    pub rel_error: f64,
}

/// Runs every `(seed, N)` combination from both an empty and a full tank and
/// reports the relative gap between realized and expected cost.
#[allow(clippy::too_many_arguments)]
pub fn convergence_report(
    policy: &ThresholdPolicy,
    demand: &QuantizedDemandModel,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
    seeds: &[u64],
    n_grid: &[u64],
) -> Result<Vec<ConvergenceRow>> {
    if seeds.is_empty() || n_grid.is_empty() {
        return Err(Error::InvalidModel("convergence report needs seeds and N values".into()));
    }
    let chain = build_chain(demand, price, spec, policy)?;
    let pi = stationary(&chain)?;
    let expected = expected_operating_cost(&pi, policy, price, spec, params)?.total_per_interval;

    let mut rows = Vec::with_capacity(seeds.len() * n_grid.len() * 2);
    for &seed in seeds {
        for &n_steps in n_grid {
            for x0 in [0, spec.n] {
                let result = simulate(policy, demand, price, spec, params, n_steps, x0, seed)?;
                let rel_error = if expected != 0.0 {
                    (result.w_n - expected).abs() / expected.abs()
                } else if result.w_n == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                };
                rows.push(ConvergenceRow { seed, n_steps, x0, w_n: result.w_n, rel_error });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::visit_frequencies_match;
    use crate::model::CapitalCost;

    fn example1() -> (QuantizedDemandModel, PriceModel, ChainSpec, ThresholdPolicy, CostParams) {
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spec = ChainSpec::new(8, 0, 7, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let params = CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap();
        (demand, price, spec, policy, params)
    }

    #[test]
    fn zero_demand_never_pump_is_free() {
        let demand = QuantizedDemandModel::new(1.0, vec![vec![1.0]]).unwrap();
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spec = ChainSpec::new(4, 1, 2, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(-1e12, &spec).unwrap();
        let params = CostParams::new(1.0, 0.0, CapitalCost::PerUnit(1.0)).unwrap();
        let result = simulate(&policy, &demand, &price, &spec, &params, 10_000, 2, 7).unwrap();
        assert_eq!(result.w_n, 0.0);
        assert_eq!(result.visit_counts[2], 10_000);
        assert_eq!(result.enforced_events, 0);
        assert_eq!(result.trajectory_summary[0], 2.0);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let (demand, price, spec, policy, params) = example1();
        let a = simulate(&policy, &demand, &price, &spec, &params, 50_000, 4, 42).unwrap();
        let b = simulate(&policy, &demand, &price, &spec, &params, 50_000, 4, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate(&policy, &demand, &price, &spec, &params, 50_000, 4, 43).unwrap();
        assert_ne!(a.w_n, c.w_n);
    }

    #[test]
    fn state_consistency_under_observation() {
        let (demand, price, spec, policy, params) = example1();
        simulate_observed(
            &policy, &demand, &price, &spec, &params, 100_000, 0, 11, |step| {
                assert!(step.i <= spec.n);
                if step.i > spec.n_s {
                    assert!(!step.pumped, "pumped above the band at step {}", step.k);
                }
                if step.i <= spec.n_p {
                    assert!(step.pumped, "missed enforced pumping at step {}", step.k);
                }
            },
        )
        .unwrap();
    }

    #[test]
    fn price_stream_unaffected_by_demand_model() {
        let (demand_a, price, spec, policy, params) = example1();
        let demand_b =
            QuantizedDemandModel::new(1.0, vec![vec![0.5, 0.5]]).unwrap();
        let spec_b = ChainSpec::new(8, 1, 5, 0, 2, 1.0, 1).unwrap();
        let policy_b = ThresholdPolicy::uniform(20.0, &spec_b).unwrap();
        let mut prices_a = Vec::new();
        let mut prices_b = Vec::new();
        simulate_observed(&policy, &demand_a, &price, &spec, &params, 1000, 4, 99, |s| {
            prices_a.push(s.price);
        })
        .unwrap();
        simulate_observed(&policy_b, &demand_b, &price, &spec_b, &params, 1000, 4, 99, |s| {
            prices_b.push(s.price);
        })
        .unwrap();
        assert_eq!(prices_a, prices_b);
    }

    #[test]
    fn visit_frequencies_approach_stationary() {
        let (demand, price, spec, policy, params) = example1();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let n_steps = 1_000_000u64;
        let result = simulate(&policy, &demand, &price, &spec, &params, n_steps, 4, 2024).unwrap();
        let gap = visit_frequencies_match(&pi, &result.visit_counts, n_steps).unwrap();
        assert!(gap < 5e-3, "gap {gap}");
    }

    #[test]
    fn convergence_report_covers_both_starts() {
        let (demand, price, spec, policy, params) = example1();
        let rows =
            convergence_report(&policy, &demand, &price, &spec, &params, &[1, 2], &[20_000])
                .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().any(|r| r.x0 == 0));
        assert!(rows.iter().any(|r| r.x0 == spec.n));
        for row in rows {
            assert!(row.rel_error < 0.2, "rel error {}", row.rel_error);
        }
    }
}
