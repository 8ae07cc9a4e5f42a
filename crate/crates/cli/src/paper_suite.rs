//! Built-in reproduction of the three illustrative co-design studies and the
//! two price-sensitivity tables, printed as one pass/fail line per check.

use anyhow::{bail, Result};
use wdsco_core::{
    codesign_sweep, optimize_policy_for_tank, sensitivity_fixed_design,
    sensitivity_misassumed_design, BandRule, CapitalCost, CostParams, GeometryRule, PolicyForm,
    PriceModel, QuantizedDemandModel, SpsaConfig, VolumeRounding,
};

const HORIZON: u64 = 175_200;

struct Checks {
    failures: usize,
}

impl Checks {
    fn new() -> Self {
        Self { failures: 0 }
    }

    fn assert(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            println!("PASS  {name}: {detail}");
        } else {
            self.failures += 1;
            println!("FAIL  {name}: {detail}");
        }
    }

    fn within(&mut self, name: &str, actual: f64, expected: f64, rel_tol: f64) {
        let rel = (actual - expected).abs() / expected.abs();
        self.assert(
            name,
            rel <= rel_tol,
            format!("{actual:.1} vs {expected:.1} (rel {:.3}%, tol {:.1}%)", rel * 100.0, rel_tol * 100.0),
        );
    }
}

fn unit_demand() -> QuantizedDemandModel {
    QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).expect("static model")
}

fn uncertain_demand() -> QuantizedDemandModel {
    let mut row = vec![0.0; 13];
    for tau in 8..=12 {
        row[tau] = 0.2;
    }
    QuantizedDemandModel::new(0.1, vec![row]).expect("static model")
}

fn baseline_price() -> PriceModel {
    PriceModel::single_phase(20.0, 10.0).expect("static model")
}

fn params() -> CostParams {
    CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).expect("static model")
}

fn unit_rule() -> GeometryRule {
    GeometryRule {
        delta_x: 1.0,
        zeta: 2,
        period_t: 1,
        n_r: 0,
        band: BandRule::FixedOffsets { n_p: 0, top_margin: 1 },
        rounding: VolumeRounding::Exact,
    }
}

fn uncertain_rule() -> GeometryRule {
    GeometryRule {
        delta_x: 0.1,
        zeta: 20,
        period_t: 1,
        n_r: 0,
        band: BandRule::FixedOffsets { n_p: 12, top_margin: 12 },
        rounding: VolumeRounding::Exact,
    }
}

pub fn run(seed: u64) -> Result<()> {
    let mut checks = Checks::new();
    let price = baseline_price();
    let params = params();

    // Study 1: state-independent threshold, constant demand.
    let spsa = SpsaConfig::for_price_model(2000, seed, &price);
    let candidates: Vec<f64> = (4..=12).map(f64::from).collect();
    let result = codesign_sweep(
        &candidates, &unit_demand(), &price, &unit_rule(), &params, HORIZON, &spsa,
        PolicyForm::Scalar,
    )?;
    checks.assert(
        "study1 tank size",
        result.best_v == 8.0,
        format!("V* = {}", result.best_v),
    );
    let alpha = result.best_policy.thresholds[0][0];
    checks.assert(
        "study1 threshold",
        (alpha - 20.0).abs() <= 0.2,
        format!("alpha* = {alpha:.3}"),
    );
    let best = result.per_candidate.iter().find(|c| c.v == result.best_v).expect("winner");
    checks.within("study1 operating cost", best.operating_n, 1_140_421.0, 0.005);
    checks.within("study1 total cost", best.total, 1_220_421.0, 0.005);

    // Study 2: state-dependent thresholds, constant demand.
    let result = codesign_sweep(
        &candidates, &unit_demand(), &price, &unit_rule(), &params, HORIZON, &spsa,
        PolicyForm::PerState,
    )?;
    checks.assert(
        "study2 tank size",
        result.best_v == 8.0,
        format!("V* = {}", result.best_v),
    );
    let best = result.per_candidate.iter().find(|c| c.v == result.best_v).expect("winner");
    checks.within("study2 operating cost", best.operating_n, 1_105_603.0, 0.01);
    let thresholds = &result.best_policy.thresholds[0];
    let monotone = thresholds.windows(2).all(|w| w[0] >= w[1] - 1e-6);
    checks.assert(
        "study2 threshold shape",
        monotone,
        format!("thresholds nonincreasing in volume: {thresholds:.2?}"),
    );

    // Study 3: state-dependent thresholds, uncertain demand.
    let mut spsa3 = SpsaConfig::for_price_model(1000, seed, &price);
    spsa3.restarts = 1;
    spsa3.polish_evals = 5000;
    let candidates3 = [6.0, 7.5, 9.6, 10.8, 12.3, 15.0];
    let demand3 = uncertain_demand();
    let result = codesign_sweep(
        &candidates3, &demand3, &price, &uncertain_rule(), &params, HORIZON, &spsa3,
        PolicyForm::PerState,
    )?;
    checks.assert(
        "study3 tank size",
        result.best_v == 9.6,
        format!("V* = {}", result.best_v),
    );
    let best = result.per_candidate.iter().find(|c| c.v == result.best_v).expect("winner");
    checks.assert(
        "study3 capital cost",
        (best.capital - 96_000.0).abs() < 1e-6,
        format!("capital = {}", best.capital),
    );
    checks.within("study3 total cost", best.total, 1_201_112.0, 0.01);

    // Re-pricing a frozen design.
    let (design_policy, _) = optimize_policy_for_tank(
        9.6, &demand3, &price, &uncertain_rule(), &params, &spsa3, PolicyForm::PerState,
    )?;
    let spec = uncertain_rule().chain_spec_for(9.6, &demand3)?;
    let grid = [
        (20.0, 10.0), (20.0, 20.0), (20.0, 5.0),
        (24.0, 10.0), (24.0, 20.0), (24.0, 5.0),
        (16.0, 10.0), (16.0, 20.0), (16.0, 5.0),
    ];
    let expected_diffs =
        [0.0, -57.27, 29.88, 36.07, -21.30, 64.57, -27.35, -84.71, 1.15];
    let rows =
        sensitivity_fixed_design(&design_policy, 9.6, &grid, &demand3, &spec, &params, HORIZON)?;
    for (row, expected) in rows.iter().zip(expected_diffs) {
        checks.assert(
            &format!("re-priced design mu={} sigma={}", row.mu, row.sigma),
            (row.diff_pct * 100.0 - expected).abs() <= 2.0,
            format!("diff {:+.2}% vs {:+.2}% (tol 2 points)", row.diff_pct * 100.0, expected),
        );
    }

    // Designing under misassumed price parameters.
    let expected_v = [9.6, 12.3, 7.5, 9.6, 12.3, 7.5, 9.6, 12.3, 7.5];
    let expected_diffs = [0.0, 1.41, 1.40, 4.01, 2.77, 7.37, 4.01, 2.77, 7.37];
    let rows = sensitivity_misassumed_design(
        &grid, (20.0, 10.0), &candidates3, &demand3, &uncertain_rule(), &params, HORIZON,
        &spsa3, PolicyForm::PerState,
    )?;
    for ((row, want_v), want_diff) in rows.iter().zip(expected_v).zip(expected_diffs) {
        checks.assert(
            &format!("misassumed design mu={} sigma={}", row.mu, row.sigma),
            row.v == want_v && (row.diff_pct * 100.0 - want_diff).abs() <= 2.0,
            format!(
                "V* = {} (want {want_v}), diff {:+.2}% vs {:+.2}% (tol 2 points)",
                row.v,
                row.diff_pct * 100.0,
                want_diff
            ),
        );
    }

    if checks.failures > 0 {
        bail!("{} reproduction checks failed", checks.failures);
    }
    println!("all reproduction checks passed");
    Ok(())
}
