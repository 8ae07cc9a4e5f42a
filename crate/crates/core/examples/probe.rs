//! Scratch experiments against the published tables (dev only).

use std::time::Instant;

use wdsco_core::*;

fn example3_demand() -> QuantizedDemandModel {
    let mut row = vec![0.0; 13];
    for tau in 8..=12 {
        row[tau] = 0.2;
    }
    QuantizedDemandModel::new(0.1, vec![row]).unwrap()
}

fn example3_rule() -> GeometryRule {
    GeometryRule {
        delta_x: 0.1,
        zeta: 20,
        period_t: 1,
        n_r: 0,
        band: BandRule::FixedOffsets { n_p: 12, top_margin: 12 },
        rounding: VolumeRounding::Exact,
    }
}

fn example12_rule() -> GeometryRule {
    GeometryRule {
        delta_x: 1.0,
        zeta: 2,
        period_t: 1,
        n_r: 0,
        band: BandRule::FixedOffsets { n_p: 0, top_margin: 1 },
        rounding: VolumeRounding::Exact,
    }
}

fn params() -> CostParams {
    CostParams::new(1.0, 0.0, CapitalCost::PerUnit(10_000.0)).unwrap()
}

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "ex2".into());
    let price = PriceModel::single_phase(20.0, 10.0).unwrap();
    let n = 175_200u64;

    match which.as_str() {
        "ex2" => {
            let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
            for (iters, restarts, polish) in
                [(2000, 2, 4000), (4000, 3, 8000), (8000, 5, 12000)]
            {
                let mut spsa = SpsaConfig::for_price_model(iters, 20260810, &price);
                spsa.restarts = restarts;
                spsa.polish_evals = polish;
                let t = Instant::now();
                let (policy, ell) = optimize_policy_for_tank(
                    8.0, &demand, &price, &example12_rule(), &params(), &spsa,
                    PolicyForm::PerState,
                )
                .unwrap();
                println!(
                    "ex2 iters={iters} restarts={restarts} polish={polish}: op_N={:.1} (target 1105603, rel {:+.4}%) {:?} [{:.2?}]",
                    ell * n as f64,
                    (ell * n as f64 / 1_105_603.0 - 1.0) * 100.0,
                    policy.thresholds[0].iter().map(|a| (a * 100.0).round() / 100.0).collect::<Vec<_>>(),
                    t.elapsed()
                );
            }
        }
        "ex3" => {
            let demand = example3_demand();
            for (iters, restarts, polish) in [(2000, 2, 6000), (4000, 3, 12000)] {
                let mut spsa = SpsaConfig::for_price_model(iters, 20260810, &price);
                spsa.restarts = restarts;
                spsa.polish_evals = polish;
                let t = Instant::now();
                let (_policy, ell) = optimize_policy_for_tank(
                    9.6, &demand, &price, &example3_rule(), &params(), &spsa,
                    PolicyForm::PerState,
                )
                .unwrap();
                println!(
                    "ex3 V=9.6 iters={iters} restarts={restarts} polish={polish}: op_N={:.1} (target 1105112, rel {:+.4}%) [{:.2?}]",
                    ell * n as f64,
                    (ell * n as f64 / 1_105_112.0 - 1.0) * 100.0,
                    t.elapsed()
                );
            }
        }
        "sweepfine" => {
            // J over a fine V grid under the baseline price, to see curvature.
            let demand = example3_demand();
            let mut spsa = SpsaConfig::for_price_model(2000, 20260810, &price);
            spsa.restarts = 2;
            spsa.polish_evals = 6000;
            let t = Instant::now();
            let candidates: Vec<f64> =
                [6.0, 7.5, 8.4, 9.0, 9.6, 10.2, 10.8, 12.3, 13.5, 15.0].to_vec();
            let result = codesign_sweep(
                &candidates, &demand, &price, &example3_rule(), &params(), n, &spsa,
                PolicyForm::PerState,
            )
            .unwrap();
            for c in &result.per_candidate {
                println!(
                    "V={:>5.1} capital={:>8.0} op_N={:>10.1} J={:>10.1}",
                    c.v, c.capital, c.operating_n, c.total
                );
            }
            println!("best V = {} J* = {:.1} [{:.2?}]", result.best_v, result.j_star, t.elapsed());
        }
        "table3" => {
            let demand = example3_demand();
            let iters: usize =
                std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
            let restarts: usize =
                std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1);
            let polish: usize =
                std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(5000);
            let mut spsa = SpsaConfig::for_price_model(iters, 20260810, &price);
            spsa.restarts = restarts;
            spsa.polish_evals = polish;
            let candidates = [6.0, 7.5, 9.6, 10.8, 12.3, 15.0];
            let assumed = [
                (20.0, 10.0),
                (20.0, 20.0),
                (20.0, 5.0),
                (24.0, 10.0),
                (24.0, 20.0),
                (24.0, 5.0),
                (16.0, 10.0),
                (16.0, 20.0),
                (16.0, 5.0),
            ];
            let expected_v = [9.6, 12.3, 7.5, 9.6, 12.3, 7.5, 9.6, 12.3, 7.5];
            let expected_diff =
                [0.0, 1.41, 1.40, 4.01, 2.77, 7.37, 4.01, 2.77, 7.37];
            let t = Instant::now();
            let rows = sensitivity_misassumed_design(
                &assumed, (20.0, 10.0), &candidates, &demand, &example3_rule(), &params(), n,
                &spsa, PolicyForm::PerState,
            )
            .unwrap();
            for (i, row) in rows.iter().enumerate() {
                println!(
                    "mu~={:>4} sig~={:>4}: V*={:>5} (want {:>5}) total={:>10.1} diff={:+.2}% (want {:+.2}%)",
                    row.mu, row.sigma, row.v, expected_v[i], row.total,
                    row.diff_pct * 100.0, expected_diff[i]
                );
            }
            println!("[{:.2?}]", t.elapsed());
        }
        "table2" => {
            let demand = example3_demand();
            let mut spsa = SpsaConfig::for_price_model(4000, 20260810, &price);
            spsa.restarts = 3;
            spsa.polish_evals = 12000;
            let (policy, ell) = optimize_policy_for_tank(
                9.6, &demand, &price, &example3_rule(), &params(), &spsa, PolicyForm::PerState,
            )
            .unwrap();
            println!("baseline op_N = {:.1}", ell * n as f64);
            let spec = example3_rule().chain_spec_for(9.6, &demand).unwrap();
            let grid = [
                (20.0, 10.0),
                (20.0, 20.0),
                (20.0, 5.0),
                (24.0, 10.0),
                (24.0, 20.0),
                (24.0, 5.0),
                (16.0, 10.0),
                (16.0, 20.0),
                (16.0, 5.0),
            ];
            let expected = [0.0, -57.27, 29.88, 36.07, -21.30, 64.57, -27.35, -84.71, 1.15];
            let rows = sensitivity_fixed_design(
                &policy, 9.6, &grid, &demand, &spec, &params(), n,
            )
            .unwrap();
            for (i, row) in rows.iter().enumerate() {
                println!(
                    "mu={:>4} sig={:>4}: op_N={:>10.1} diff={:+.2}% (want {:+.2}%)",
                    row.mu, row.sigma, row.operating_n, row.diff_pct * 100.0, expected[i]
                );
            }
        }
        "theorem1" => {
            let demand = QuantizedDemandModel::new(1.0, vec![vec![0.0, 1.0]]).unwrap();
            let spec = example12_rule().chain_spec_for(8.0, &demand).unwrap();
            let policy = ThresholdPolicy::uniform(20.0, &spec).unwrap();
            let expected = 1_140_421.0;
            let t = Instant::now();
            let mut worst: f64 = 0.0;
            let mut fails = 0;
            for seed in 0..100u64 {
                let x0 = if seed % 2 == 0 { 0 } else { spec.n };
                let result = simulate(
                    &policy, &demand, &price, &spec, &params(), n, x0, 1000 + seed,
                )
                .unwrap();
                let rel = (result.w_n * n as f64 - expected).abs() / expected;
                worst = worst.max(rel);
                if rel >= 0.01 {
                    fails += 1;
                    println!("  seed {seed} x0={x0}: rel {:.4}%", rel * 100.0);
                }
            }
            println!("theorem1: fails={fails}/100 worst={:.4}% [{:.2?}]", worst * 100.0, t.elapsed());
        }
        other => eprintln!("unknown probe {other}"),
    }
}
