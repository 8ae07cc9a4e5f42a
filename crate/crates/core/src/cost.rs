//! Expected operating cost under the stationary distribution, and the
//! capital-plus-operating co-design objective.

use crate::chain::{build_chain, stationary, StationaryDistribution};
use crate::error::{Error, Result};
use crate::gaussian;
use crate::model::{ChainSpec, CostParams, PriceModel, QuantizedDemandModel, ThresholdPolicy};

/// Expected cost per interval split by control regime.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct CostBreakdown {
    /// Enforced-pumping energy cost (states at or below `n_p`).
    pub enforced: f64,
    /// Price-threshold pumping energy cost (band states).
    pub threshold: f64,
    /// Low-volume penalty (states at or below `n_r`).
    pub penalty: f64,
    pub total_per_interval: f64,
}

/// Conditional mean `E[r | r <= alpha]` of a Gaussian price.
///
/// Evaluates `mu - sigma^2 f(alpha) / F(alpha)`; fails when the truncation
/// mass `F(alpha)` underflows.
pub fn truncated_mean(alpha: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidModel("truncated mean needs sigma > 0".into()));
    }
    let mass = gaussian::cdf(alpha, mu, sigma);
    if mass < 1e-300 {
        return Err(Error::DegenerateTruncation { alpha });
    }
    Ok(mu - sigma * sigma * gaussian::pdf(alpha, mu, sigma) / mass)
}

fn enforced_part(i: usize, kappa: usize, price: &PriceModel, spec: &ChainSpec, params: &CostParams) -> f64 {
    if i <= spec.n_p {
        params.eps_p * price.mean[kappa]
    } else {
        0.0
    }
}

fn threshold_part(
    i: usize,
    kappa: usize,
    policy: &ThresholdPolicy,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
) -> f64 {
    if i > spec.n_p && i <= spec.n_s {
        let alpha = policy.alpha_at(i, kappa, spec);
        params.eps_p * gaussian::partial_expectation(alpha, price.mean[kappa], price.std[kappa])
    } else {
        0.0
    }
}

fn penalty_part(i: usize, spec: &ChainSpec, params: &CostParams) -> f64 {
    if i <= spec.n_r {
        params.penalty_w
    } else {
        0.0
    }
}

/// Expected one-interval cost of state `(i, kappa)`.
///
/// Enforced states pay the full mean price, band states pay the partial
/// price expectation below their threshold (pump probability times the
/// truncated mean), states above the band pay nothing; the penalty applies
/// to every state at or below `n_r`.
pub fn expected_state_cost(
    i: usize,
    kappa: usize,
    policy: &ThresholdPolicy,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
) -> f64 {
    enforced_part(i, kappa, price, spec, params)
        + threshold_part(i, kappa, policy, price, spec, params)
        + penalty_part(i, spec, params)
}

/// Stationary-weighted expected operating cost per interval.
pub fn expected_operating_cost(
    pi: &StationaryDistribution,
    policy: &ThresholdPolicy,
    price: &PriceModel,
    spec: &ChainSpec,
    params: &CostParams,
) -> Result<CostBreakdown> {
    if pi.n() != spec.n || pi.period_t() != spec.period_t {
        return Err(Error::DimensionMismatch(format!(
            "stationary distribution is for n={}, T={}, spec has n={}, T={}",
            pi.n(),
            pi.period_t(),
            spec.n,
            spec.period_t
        )));
    }
    policy.check_dims(spec)?;
    if price.period_t != spec.period_t {
        return Err(Error::DimensionMismatch("price period differs from chain period".into()));
    }

    let mut enforced = 0.0;
    let mut threshold = 0.0;
    let mut penalty = 0.0;
    for (state, p) in pi.iter_states() {
        if p == 0.0 {
            continue;
        }
        enforced += p * enforced_part(state.i, state.kappa, price, spec, params);
        threshold += p * threshold_part(state.i, state.kappa, policy, price, spec, params);
        penalty += p * penalty_part(state.i, spec, params);
    }
    Ok(CostBreakdown {
        enforced,
        threshold,
        penalty,
        total_per_interval: enforced + threshold + penalty,
    })
}

/// Total co-design cost `c_t(V) + N * expected cost per interval`, building
/// the chain and its stationary distribution internally.
#[allow(clippy::too_many_arguments)]
pub fn total_codesign_cost(
    v: f64,
    policy: &ThresholdPolicy,
    price: &PriceModel,
    demand: &QuantizedDemandModel,
    spec: &ChainSpec,
    params: &CostParams,
    n_intervals: u64,
) -> Result<f64> {
    let capital = params.capital_cost.capital_for(v)?;
    let chain = build_chain(demand, price, spec, policy)?;
    let pi = stationary(&chain)?;
    let breakdown = expected_operating_cost(&pi, policy, price, spec, params)?;
    Ok(capital + n_intervals as f64 * breakdown.total_per_interval)
}

/// Net-present-value variant: annual operating cost discounted over
/// `N / K` years with inflation `beta` and discount rate `xi`.
#[allow(clippy::too_many_arguments)]
pub fn npv_codesign_cost(
    v: f64,
    policy: &ThresholdPolicy,
    price: &PriceModel,
    demand: &QuantizedDemandModel,
    spec: &ChainSpec,
    params: &CostParams,
    n_intervals: u64,
    k_per_year: u64,
    beta: f64,
    xi: f64,
) -> Result<f64> {
    if k_per_year == 0 {
        return Err(Error::InvalidModel("intervals per year K must be positive".into()));
    }
    if n_intervals % k_per_year != 0 {
        return Err(Error::InvalidModel(format!(
            "K = {k_per_year} must divide N = {n_intervals}"
        )));
    }
    if xi == -1.0 {
        return Err(Error::InvalidModel("discount rate xi = -1 is singular".into()));
    }
    let capital = params.capital_cost.capital_for(v)?;
    let chain = build_chain(demand, price, spec, policy)?;
    let pi = stationary(&chain)?;
    let per_interval = expected_operating_cost(&pi, policy, price, spec, params)?.total_per_interval;

    let years = n_intervals / k_per_year;
    let ratio = (1.0 + beta) / (1.0 + xi);
    let mut discount_sum = 0.0;
    let mut factor = 1.0;
    for _ in 0..years {
        factor *= ratio;
        discount_sum += factor;
    }
    Ok(capital + k_per_year as f64 * per_interval * discount_sum)
}

/// True when the instance is the single-phase constant-unit-demand geometry
/// (`zeta = 2`, `n_p = 0`, `n_s = n - 1`, `n_r = 0`) whose stationary
/// boundary probabilities have a closed form.
pub fn closed_form_applies(demand: &QuantizedDemandModel, spec: &ChainSpec) -> bool {
    spec.period_t == 1
        && spec.zeta == 2
        && spec.n_p == 0
        && spec.n_s == spec.n - 1
        && spec.n_r == 0
        && demand.levels_m == 2
        && demand.probs[0][1] == 1.0
}

/// Fast operating-cost evaluation for the single-phase constant-unit-demand
/// geometry (`zeta = 2`, `n_p = 0`, `n_s = V - 1`, `n_r = 0`) with a
/// state-independent threshold, using the closed-form stationary boundary
/// probabilities instead of a linear solve.
pub fn example1_operating_cost(
    alpha: f64,
    v: usize,
    price: &PriceModel,
    params: &CostParams,
) -> Result<f64> {
    let pi0 = crate::chain::analytic_pi0_example1(alpha, v, price)?;
    let f = gaussian::cdf(alpha, price.mean[0], price.std[0]);
    // Cut balance gives pi^V = pi^0 * (F / (1-F))^(V-1).
    let pi_top = if (f - 0.5).abs() <= 1e-9 {
        pi0
    } else {
        pi0 * (f / (1.0 - f)).powi(v as i32 - 1)
    };
    let band_mass = (1.0 - pi0 - pi_top).max(0.0);
    let enforced = pi0 * (params.eps_p * price.mean[0] + params.penalty_w);
    let band = band_mass
        * params.eps_p
        * gaussian::partial_expectation(alpha, price.mean[0], price.std[0]);
    Ok(enforced + band)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CapitalCost;
    use approx::assert_relative_eq;

    fn params() -> CostParams {
        CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap()
    }

    fn example1() -> (QuantizedDemandModel, PriceModel, ChainSpec) {
        (
            QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap(),
            PriceModel::single_phase(20.0, 10.0).unwrap(),
            ChainSpec::new(8, 0, 7, 0, 2, 1.0, 1).unwrap(),
        )
    }

    #[test]
    fn truncated_mean_limits() {
        assert_relative_eq!(truncated_mean(1e9, 20.0, 10.0).unwrap(), 20.0, epsilon = 1e-9);
        // Half truncation: mu - sigma * sqrt(2/pi).
        let half = truncated_mean(20.0, 20.0, 10.0).unwrap();
        assert_relative_eq!(half, 20.0 - 10.0 * (2.0 / std::f64::consts::PI).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(half, 12.021154391971346, epsilon = 1e-12);
    }

    #[test]
    fn truncated_mean_degenerate() {
        assert!(matches!(
            truncated_mean(-400.0, 20.0, 1.0),
            Err(Error::DegenerateTruncation { .. })
        ));
    }

    #[test]
    fn state_cost_by_regime() {
        let (_, price, spec) = example1();
        let p = params();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        // Enforced: full mean price.
        assert_relative_eq!(expected_state_cost(0, 0, &policy, &price, &spec, &p), 20.0);
        // Band at alpha = mu: half the half-truncated mean.
        assert_relative_eq!(
            expected_state_cost(3, 0, &policy, &price, &spec, &p),
            0.5 * 12.021154391971346,
            epsilon = 1e-12
        );
        // Above the band: free.
        assert_eq!(expected_state_cost(8, 0, &policy, &price, &spec, &p), 0.0);

        let never = ThresholdPolicy::uniform(-1e12, &spec).unwrap();
        assert_eq!(expected_state_cost(3, 0, &never, &price, &spec, &p), 0.0);
    }

    #[test]
    fn breakdown_components_sum() {
        let (demand, price, spec) = example1();
        let p = params();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let breakdown = expected_operating_cost(&pi, &policy, &price, &spec, &p).unwrap();
        assert_eq!(
            breakdown.total_per_interval,
            breakdown.enforced + breakdown.threshold + breakdown.penalty
        );
        // Cross-check against the per-state accessor.
        let direct: f64 = pi
            .iter_states()
            .map(|(s, prob)| prob * expected_state_cost(s.i, s.kappa, &policy, &price, &spec, &p))
            .sum();
        assert_relative_eq!(breakdown.total_per_interval, direct, epsilon = 1e-12);
    }

    #[test]
    fn example1_operating_cost_at_optimum() {
        // pi0 = 1/16, band mass 7/8 pumping half the time at the truncated mean.
        let (_, price, _) = example1();
        let ell = example1_operating_cost(20.0, 8, &price, &params()).unwrap();
        let expected = 20.0 / 16.0 + 0.875 * 0.5 * 12.021154391971346;
        assert_relative_eq!(ell, expected, epsilon = 1e-12);
        // Matches the Markov-chain evaluation path.
        let (demand, price, spec) = example1();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let breakdown = expected_operating_cost(&pi, &policy, &price, &spec, &params()).unwrap();
        assert_relative_eq!(ell, breakdown.total_per_interval, epsilon = 1e-10);
    }

    #[test]
    fn total_cost_with_zero_horizon_is_capital() {
        let (demand, price, spec) = example1();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let total =
            total_codesign_cost(8.0, &policy, &price, &demand, &spec, &params(), 0).unwrap();
        assert_eq!(total, 80_000.0);
    }

    #[test]
    fn npv_equals_total_when_rates_match() {
        let (demand, price, spec) = example1();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let p = params();
        let total =
            total_codesign_cost(8.0, &policy, &price, &demand, &spec, &p, 175_200).unwrap();
        for rates in [(0.0, 0.0), (0.03, 0.03)] {
            let npv = npv_codesign_cost(
                8.0, &policy, &price, &demand, &spec, &p, 175_200, 8760, rates.0, rates.1,
            )
            .unwrap();
            assert_relative_eq!(npv, total, max_relative = 1e-12);
        }
    }

    #[test]
    fn npv_geometric_discount() {
        let (demand, price, spec) = example1();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let p = params();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let ell = expected_operating_cost(&pi, &policy, &price, &spec, &p)
            .unwrap()
            .total_per_interval;
        // Two years, beta = 0, xi = 0.05: discount sum 1/1.05 + 1/1.05^2.
        let npv = npv_codesign_cost(
            8.0, &policy, &price, &demand, &spec, &p, 17_520, 8760, 0.0, 0.05,
        )
        .unwrap();
        let expected = 80_000.0 + 8760.0 * ell * (1.0 / 1.05 + 1.0 / 1.05_f64.powi(2));
        assert_relative_eq!(npv, expected, max_relative = 1e-12);
    }

    #[test]
    fn npv_rejects_bad_k() {
        let (demand, price, spec) = example1();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let p = params();
        assert!(npv_codesign_cost(8.0, &policy, &price, &demand, &spec, &p, 100, 0, 0.0, 0.0)
            .is_err());
        assert!(npv_codesign_cost(8.0, &policy, &price, &demand, &spec, &p, 100, 33, 0.0, 0.0)
            .is_err());
    }
}
