//! Sensitivity of operating and total cost to the electricity-price
//! distribution: once with the design frozen while the true prices move,
//! and once with the design re-run under misassumed prices and evaluated
//! under the true ones.

use serde::Serialize;

use crate::chain::{build_chain, stationary};
use crate::cost::expected_operating_cost;
use crate::error::{Error, Result};
use crate::model::{ChainSpec, CostParams, GeometryRule, PriceModel, QuantizedDemandModel, ThresholdPolicy};
use crate::optimize::{codesign_sweep, PolicyForm, SpsaConfig};

/// One row of a sensitivity study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SensitivityRow {
    pub mu: f64,
    pub sigma: f64,
    pub v: f64,
    pub capital: f64,
    pub operating_n: f64,
    pub total: f64,
    /// Relative difference against the first (baseline) row: operating-cost
    /// based for the fixed-design study, total-cost based for the
    /// misassumed-design study.
    pub diff_pct: f64,
}

fn replicated_price(mu: f64, sigma: f64, period_t: usize) -> Result<PriceModel> {
    PriceModel::new(vec![mu; period_t], vec![sigma; period_t])
}

/// Re-prices a fixed design: the tank size and thresholds stay as designed
/// while the chain is rebuilt under each true `(mu, sigma)` pair. The first
/// grid entry is the baseline for the relative differences.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_fixed_design(
    policy: &ThresholdPolicy,
    v: f64,
    true_params_grid: &[(f64, f64)],
    demand: &QuantizedDemandModel,
    spec: &ChainSpec,
    params: &CostParams,
    n_intervals: u64,
) -> Result<Vec<SensitivityRow>> {
    if true_params_grid.is_empty() {
        return Err(Error::InvalidModel("sensitivity grid is empty".into()));
    }
    let capital = params.capital_cost.capital_for(v)?;
    let mut rows = Vec::with_capacity(true_params_grid.len());
    let mut baseline = None;
    for &(mu, sigma) in true_params_grid {
        let price = replicated_price(mu, sigma, spec.period_t)?;
        let chain = build_chain(demand, &price, spec, policy)?;
        let pi = stationary(&chain)?;
        let per_interval =
            expected_operating_cost(&pi, policy, &price, spec, params)?.total_per_interval;
        let operating_n = n_intervals as f64 * per_interval;
        let base = *baseline.get_or_insert(operating_n);
        rows.push(SensitivityRow {
            mu,
            sigma,
            v,
            capital,
            operating_n,
            total: capital + operating_n,
            diff_pct: (operating_n - base) / base,
        });
    }
    Ok(rows)
}

/// Re-designs under each assumed `(mu, sigma)` pair, then evaluates the
/// resulting tank size and thresholds under the true price parameters. The
/// first grid entry is the baseline for the relative differences.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_misassumed_design(
    assumed_grid: &[(f64, f64)],
    true_params: (f64, f64),
    candidates: &[f64],
    demand: &QuantizedDemandModel,
    rule: &GeometryRule,
    params: &CostParams,
    n_intervals: u64,
    spsa: &SpsaConfig,
    form: PolicyForm,
) -> Result<Vec<SensitivityRow>> {
    if assumed_grid.is_empty() {
        return Err(Error::InvalidModel("sensitivity grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(assumed_grid.len());
    let mut baseline = None;
    for &(assumed_mu, assumed_sigma) in assumed_grid {
        let assumed_price = replicated_price(assumed_mu, assumed_sigma, rule.period_t)?;
        let design = codesign_sweep(
            candidates, demand, &assumed_price, rule, params, n_intervals, spsa, form,
        )?;

        let spec = rule.chain_spec_for(design.best_v, demand)?;
        let true_price = replicated_price(true_params.0, true_params.1, rule.period_t)?;
        let chain = build_chain(demand, &true_price, &spec, &design.best_policy)?;
        let pi = stationary(&chain)?;
        let per_interval =
            expected_operating_cost(&pi, &design.best_policy, &true_price, &spec, params)?
                .total_per_interval;
        let operating_n = n_intervals as f64 * per_interval;
        let capital = params.capital_cost.capital_for(design.best_v)?;
        let total = capital + operating_n;
        let base = *baseline.get_or_insert(total);
        rows.push(SensitivityRow {
            mu: assumed_mu,
            sigma: assumed_sigma,
            v: design.best_v,
            capital,
            operating_n,
            total,
            diff_pct: (total - base) / base,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BandRule, CapitalCost, VolumeRounding};

    fn example1_instance() -> (QuantizedDemandModel, ChainSpec, ThresholdPolicy, CostParams) {
        let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
        let spec = ChainSpec::new(8, 0, 7, 0, 2, 1.0, 1).unwrap();
        let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
        let params = CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap();
        (demand, spec, policy, params)
    }

    #[test]
    fn baseline_row_has_zero_diff_and_matches_direct_evaluation() {
        let (demand, spec, policy, params) = example1_instance();
        let grid = [(20.0, 10.0), (24.0, 10.0), (16.0, 20.0)];
        let rows =
            sensitivity_fixed_design(&policy, 8.0, &grid, &demand, &spec, &params, 175_200)
                .unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].diff_pct, 0.0);

        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let chain = build_chain(&demand, &price, &spec, &policy).unwrap();
        let pi = stationary(&chain).unwrap();
        let direct = expected_operating_cost(&pi, &policy, &price, &spec, &params)
            .unwrap()
            .total_per_interval
            * 175_200.0;
        assert_eq!(rows[0].operating_n, direct);

        // Dearer prices with the same spread must raise the pumping bill.
        assert!(rows[1].diff_pct > 0.0);
    }

    #[test]
    fn misassumed_design_baseline_is_zero() {
        let (demand, _, _, params) = example1_instance();
        let rule = GeometryRule {
            delta_x: 1.0,
            zeta: 2,
            period_t: 1,
            n_r: 0,
            band: BandRule::FixedOffsets { n_p: 0, top_margin: 1 },
            rounding: VolumeRounding::Exact,
        };
        let price = PriceModel::single_phase(20.0, 10.0).unwrap();
        let spsa = SpsaConfig::for_price_model(300, 5, &price);
        let rows = sensitivity_misassumed_design(
            &[(20.0, 10.0), (20.0, 5.0)],
            (20.0, 10.0),
            &[7.0, 8.0, 9.0],
            &demand,
            &rule,
            &params,
            175_200,
            &spsa,
            PolicyForm::Scalar,
        )
        .unwrap();
        assert_eq!(rows[0].diff_pct, 0.0);
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.total >= rows[0].total - 1e-6, "baseline should be optimal under truth");
        }
    }
}
