//! Subcommand implementations. Each one reads what it needs from the run
//! config, writes its artifacts through the output stage, and reports a
//! one-line summary on stdout.

use anyhow::{bail, Context, Result};
use serde::Serialize;
use wdsco_core::{
    build_chain, closed_form_applies, convergence_report, estimate_price_model,
    example1_operating_cost, expected_operating_cost, npv_codesign_cost, codesign_sweep,
    optimize_policy_for_tank, quantize_demand_series, read_series_csv, sensitivity_fixed_design,
    sensitivity_misassumed_design, simulate, simulate_observed, stationary, ModelDocument,
    PriceModel, SensitivityRow, ThresholdPolicy,
};

use crate::config::RunConfig;
use crate::output::{sig6, OutputStage};

pub struct TaskInputs<'a> {
    pub config: &'a RunConfig,
    /// Seed from `--seed`, overriding the config seed.
    pub seed_override: Option<u64>,
    pub trajectory: bool,
}

impl TaskInputs<'_> {
    fn base_seed(&self) -> u64 {
        self.seed_override.or(self.config.task.spsa.seed).unwrap_or(0)
    }

    fn spsa(&self) -> Result<wdsco_core::SpsaConfig> {
        self.config.task.spsa.build(&self.config.instance.price, self.seed_override)
    }
}

fn require_valid(config: &RunConfig) -> Result<()> {
    let report = config.validate_instance()?;
    if !report.passed() {
        bail!("instance validation failed: {}", report.failure_summary());
    }
    Ok(())
}

fn replicated_price(mu: f64, sigma: f64, period_t: usize) -> Result<PriceModel> {
    Ok(PriceModel::new(vec![mu; period_t], vec![sigma; period_t])?)
}

pub fn run_validate(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    let report = inputs.config.validate_instance()?;
    stage.write_json("validation.json", &report)?;
    if !report.passed() {
        bail!("instance validation failed: {}", report.failure_summary());
    }
    println!("instance valid: {} checks passed", report.checks.len());
    Ok(())
}

pub fn run_chain(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let v = config.representative_v()?;
    let spec = config.chain_spec(v)?;
    let policy = config.policy_for(&spec)?;
    let chain = build_chain(&config.instance.demand, &config.instance.price, &spec, &policy)?;

    let mut csv = String::from("from_i,from_kappa,to_i,to_kappa,prob\n");
    for (from_i, from_kappa, to_i, to_kappa, prob) in chain.triplets() {
        csv.push_str(&format!("{from_i},{from_kappa},{to_i},{to_kappa},{}\n", sig6(prob)));
    }
    stage.write("matrix.csv", csv.as_bytes())?;
    println!(
        "chain built: {} states, {} transitions",
        chain.n_states(),
        chain.triplets().len()
    );
    Ok(())
}

pub fn run_stationary(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let v = config.representative_v()?;
    let spec = config.chain_spec(v)?;
    let policy = config.policy_for(&spec)?;
    let chain = build_chain(&config.instance.demand, &config.instance.price, &spec, &policy)?;
    let pi = stationary(&chain)?;

    stage.write("stationary.csv", stationary_csv(&pi).as_bytes())?;
    println!("stationary distribution solved over {} states", chain.n_states());
    Ok(())
}

fn stationary_csv(pi: &wdsco_core::StationaryDistribution) -> String {
    let mut csv = String::from("i,kappa,pi\n");
    for (state, p) in pi.iter_states() {
        csv.push_str(&format!("{},{},{}\n", state.i, state.kappa, sig6(p)));
    }
    csv
}

#[derive(Serialize)]
struct CostReport {
    capital: f64,
    enforced: f64,
    threshold: f64,
    penalty: f64,
    per_interval: f64,
    #[serde(rename = "total_N")]
    total_n: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    npv: Option<f64>,
}

pub fn run_evaluate(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let v = config.representative_v()?;
    let n = config.horizon()?;
    let spec = config.chain_spec(v)?;
    let policy = config.policy_for(&spec)?;
    let instance = &config.instance;
    let chain = build_chain(&instance.demand, &instance.price, &spec, &policy)?;
    let pi = stationary(&chain)?;
    let breakdown = expected_operating_cost(&pi, &policy, &instance.price, &spec, &instance.cost_params)?;
    let capital = instance.cost_params.capital_cost.capital_for(v)?;
    let npv = match &config.task.npv {
        Some(npv) => Some(npv_codesign_cost(
            v,
            &policy,
            &instance.price,
            &instance.demand,
            &spec,
            &instance.cost_params,
            n,
            npv.k_per_year,
            npv.beta,
            npv.xi,
        )?),
        None => None,
    };
    let report = CostReport {
        capital,
        enforced: breakdown.enforced,
        threshold: breakdown.threshold,
        penalty: breakdown.penalty,
        per_interval: breakdown.total_per_interval,
        total_n: capital + n as f64 * breakdown.total_per_interval,
        npv,
    };
    stage.write_json("cost.json", &report)?;
    println!(
        "evaluated V={v}: per-interval {}, total over N {}",
        sig6(report.per_interval),
        sig6(report.total_n)
    );
    Ok(())
}

fn policy_csv(policy: &ThresholdPolicy, spec: &wdsco_core::ChainSpec) -> String {
    let mut csv = String::from("kappa,i,alpha\n");
    for (kappa, row) in policy.thresholds.iter().enumerate() {
        for (offset, alpha) in row.iter().enumerate() {
            csv.push_str(&format!("{kappa},{},{}\n", spec.n_p + 1 + offset, sig6(*alpha)));
        }
    }
    csv
}

#[derive(Serialize)]
struct OptimizeReport<'a> {
    v: f64,
    per_interval: f64,
    #[serde(rename = "operating_N")]
    operating_n: f64,
    capital: f64,
    #[serde(rename = "total_N")]
    total_n: f64,
    policy: &'a ThresholdPolicy,
}

pub fn run_optimize(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let v = config.representative_v()?;
    let n = config.horizon()?;
    let instance = &config.instance;
    let spsa = inputs.spsa()?;
    let (policy, per_interval) = optimize_policy_for_tank(
        v,
        &instance.demand,
        &instance.price,
        &instance.geometry,
        &instance.cost_params,
        &spsa,
        config.task.policy_form,
    )?;
    let capital = instance.cost_params.capital_cost.capital_for(v)?;
    let spec = config.chain_spec(v)?;
    let report = OptimizeReport {
        v,
        per_interval,
        operating_n: n as f64 * per_interval,
        capital,
        total_n: capital + n as f64 * per_interval,
        policy: &policy,
    };
    stage.write_json("optimize.json", &report)?;
    stage.write("policy.csv", policy_csv(&policy, &spec).as_bytes())?;
    println!(
        "optimized V={v}: operating over N {}, total {}",
        sig6(report.operating_n),
        sig6(report.total_n)
    );
    Ok(())
}

pub fn run_codesign(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    if config.task.candidates.is_empty() {
        bail!("config needs task.candidates for the codesign sweep");
    }
    let n = config.horizon()?;
    let instance = &config.instance;
    let spsa = inputs.spsa()?;
    let result = codesign_sweep(
        &config.task.candidates,
        &instance.demand,
        &instance.price,
        &instance.geometry,
        &instance.cost_params,
        n,
        &spsa,
        config.task.policy_form,
    )?;

    let mut csv = String::from("V,capital,operating_N,total\n");
    for candidate in &result.per_candidate {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            sig6(candidate.v),
            sig6(candidate.capital),
            sig6(candidate.operating_n),
            sig6(candidate.total)
        ));
    }
    stage.write_json("codesign.json", &result)?;
    stage.write("candidates.csv", csv.as_bytes())?;
    println!("codesign best V = {}, J* = {}", result.best_v, sig6(result.j_star));
    Ok(())
}

pub fn run_simulate(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let sim = config
        .task
        .simulation
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config needs task.simulation for this subcommand"))?;
    let v = config.representative_v()?;
    let spec = config.chain_spec(v)?;
    let policy = config.policy_for(&spec)?;
    let instance = &config.instance;
    let seeds = sim.resolve_seeds(inputs.base_seed());
    let n_grid = sim.n_grid.clone().unwrap_or_else(|| vec![sim.n_steps]);

    let rows = convergence_report(
        &policy,
        &instance.demand,
        &instance.price,
        &spec,
        &instance.cost_params,
        &seeds,
        &n_grid,
    )?;
    let mut csv = String::from("seed,N,x0,W_N,rel_error\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            row.seed,
            row.n_steps,
            row.x0,
            sig6(row.w_n),
            sig6(row.rel_error)
        ));
    }
    stage.write("report.csv", csv.as_bytes())?;

    let x0 = sim.x0.unwrap_or(spec.n / 2);
    let summaries: Vec<_> = seeds
        .iter()
        .map(|&seed| {
            simulate(
                &policy,
                &instance.demand,
                &instance.price,
                &spec,
                &instance.cost_params,
                sim.n_steps,
                x0,
                seed,
            )
            .map(|r| {
                serde_json::json!({
                    "seed": r.seed,
                    "n_steps": r.n_steps,
                    "x0": x0,
                    "w_n": r.w_n,
                    "enforced_events": r.enforced_events,
                    "empty_events": r.empty_events,
                    "mean_volume_per_phase": r.trajectory_summary,
                })
            })
        })
        .collect::<wdsco_core::Result<_>>()?;
    stage.write_json("sim_summary.json", &summaries)?;

    if inputs.trajectory {
        let mut csv = String::from("k,kappa,i,price,demand_tau,pumped,cost\n");
        simulate_observed(
            &policy,
            &instance.demand,
            &instance.price,
            &spec,
            &instance.cost_params,
            sim.n_steps,
            x0,
            seeds[0],
            |step| {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    step.k,
                    step.kappa,
                    step.i,
                    sig6(step.price),
                    step.demand_tau,
                    u8::from(step.pumped),
                    sig6(step.cost)
                ));
            },
        )?;
        stage.write("trajectory.csv", csv.as_bytes())?;
    }

    let worst = rows.iter().map(|r| r.rel_error).fold(0.0f64, f64::max);
    println!(
        "simulated {} runs x {} horizons: worst relative error {}",
        seeds.len(),
        n_grid.len(),
        sig6(worst)
    );
    Ok(())
}

fn sensitivity_csv(rows: &[SensitivityRow]) -> String {
    let mut csv = String::from("mu,sigma,V,capital,operating_N,total,diff_pct\n");
    for row in rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            sig6(row.mu),
            sig6(row.sigma),
            sig6(row.v),
            sig6(row.capital),
            sig6(row.operating_n),
            sig6(row.total),
            sig6(row.diff_pct)
        ));
    }
    csv
}

fn scenario_file_name(prefix: &str, mu: f64, sigma: f64) -> String {
    let fmt = |x: f64| {
        if x.fract() == 0.0 {
            format!("{}", x as i64)
        } else {
            format!("{x}").replace('.', "p")
        }
    };
    format!("{prefix}_mu{}_sigma{}.csv", fmt(mu), fmt(sigma))
}

pub fn run_sensitivity(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let study = config
        .task
        .sensitivity
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config needs task.sensitivity for this subcommand"))?;
    if study.true_grid.is_empty() || study.assumed_grid.is_empty() {
        bail!("sensitivity grids must be non-empty");
    }
    let n = config.horizon()?;
    let instance = &config.instance;
    let spsa = inputs.spsa()?;

    // Fixed-design study: optimize once under the baseline (first grid
    // entry), then re-price that design.
    let (base_mu, base_sigma) = study.true_grid[0];
    let design_price = replicated_price(base_mu, base_sigma, instance.geometry.period_t)?;
    let (design_policy, _) = optimize_policy_for_tank(
        study.fixed_v,
        &instance.demand,
        &design_price,
        &instance.geometry,
        &instance.cost_params,
        &spsa,
        config.task.policy_form,
    )?;
    let spec = config.chain_spec(study.fixed_v)?;
    let fixed_rows = sensitivity_fixed_design(
        &design_policy,
        study.fixed_v,
        &study.true_grid,
        &instance.demand,
        &spec,
        &instance.cost_params,
        n,
    )?;
    stage.write("fixed_design.csv", sensitivity_csv(&fixed_rows).as_bytes())?;

    // Stationary occupancy per re-priced scenario, for distribution plots.
    for &(mu, sigma) in &study.true_grid {
        let price = replicated_price(mu, sigma, instance.geometry.period_t)?;
        let chain = build_chain(&instance.demand, &price, &spec, &design_policy)?;
        let pi = stationary(&chain)?;
        stage.write(
            &scenario_file_name("stationary", mu, sigma),
            stationary_csv(&pi).as_bytes(),
        )?;
    }

    let misassumed_rows = sensitivity_misassumed_design(
        &study.assumed_grid,
        study.true_params,
        &config.task.candidates,
        &instance.demand,
        &instance.geometry,
        &instance.cost_params,
        n,
        &spsa,
        config.task.policy_form,
    )?;
    stage.write("misassumed_design.csv", sensitivity_csv(&misassumed_rows).as_bytes())?;

    println!(
        "sensitivity: {} re-priced rows, {} misassumed designs",
        fixed_rows.len(),
        misassumed_rows.len()
    );
    Ok(())
}

pub fn run_surface(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    require_valid(inputs.config)?;
    let config = inputs.config;
    let surface = config
        .task
        .surface
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config needs task.surface for this subcommand"))?;
    if !(surface.alpha_step > 0.0) || surface.alpha_max < surface.alpha_min {
        bail!("surface alpha grid is ill-formed");
    }
    let n = config.horizon()?;
    let instance = &config.instance;

    let mut csv = String::from("V,alpha,capital,operating_N,total\n");
    let mut best: Option<(f64, f64, f64)> = None;
    for &v in &surface.v_values {
        let spec = config.chain_spec(v)?;
        let capital = instance.cost_params.capital_cost.capital_for(v)?;
        let closed_form = closed_form_applies(&instance.demand, &spec);
        let mut alpha = surface.alpha_min;
        while alpha <= surface.alpha_max + 1e-12 {
            let per_interval = if closed_form {
                example1_operating_cost(alpha, spec.n, &instance.price, &instance.cost_params)?
            } else {
                let policy = ThresholdPolicy::uniform(alpha, &spec)?;
                let chain =
                    build_chain(&instance.demand, &instance.price, &spec, &policy)?;
                let pi = stationary(&chain)?;
                expected_operating_cost(&pi, &policy, &instance.price, &spec, &instance.cost_params)?
                    .total_per_interval
            };
            let operating_n = n as f64 * per_interval;
            let total = capital + operating_n;
            csv.push_str(&format!(
                "{},{},{},{},{}\n",
                sig6(v),
                sig6(alpha),
                sig6(capital),
                sig6(operating_n),
                sig6(total)
            ));
            if best.is_none_or(|(_, _, t)| total < t) {
                best = Some((v, alpha, total));
            }
            alpha += surface.alpha_step;
        }
    }
    stage.write("surface.csv", csv.as_bytes())?;
    let (best_v, best_alpha, best_total) = best.expect("non-empty surface grid");
    stage.write_json(
        "surface_min.json",
        &serde_json::json!({ "v": best_v, "alpha": best_alpha, "total": best_total }),
    )?;
    println!(
        "surface minimum at V={}, alpha={} (total {})",
        sig6(best_v),
        sig6(best_alpha),
        sig6(best_total)
    );
    Ok(())
}

pub fn run_fit(inputs: &TaskInputs, stage: &mut OutputStage) -> Result<()> {
    let config = inputs.config;
    let fit = config
        .task
        .fit
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config needs task.fit for this subcommand"))?;

    let demand_series = read_series_csv(&fit.demand_csv)
        .with_context(|| format!("reading {}", fit.demand_csv.display()))?;
    let price_series = read_series_csv(&fit.price_csv)
        .with_context(|| format!("reading {}", fit.price_csv.display()))?;

    let demand = quantize_demand_series(&demand_series, fit.quantum_d, fit.period_t)?;
    let price = estimate_price_model(&price_series, fit.period_t, fit.extreme_cutoff)?;
    let removed = price_series.iter().filter(|s| s.value > fit.extreme_cutoff).count();

    let chain_spec = match config.task.v {
        Some(v) => Some(config.instance.geometry.chain_spec_for(v, &demand)?),
        None => None,
    };
    let document = ModelDocument {
        demand,
        price,
        chain_spec,
        cost_params: Some(config.instance.cost_params.clone()),
    };
    stage.write("model.json", format!("{}\n", document.to_json()?).as_bytes())?;
    stage.write_json(
        "fit_report.json",
        &serde_json::json!({
            "demand_samples": demand_series.len(),
            "price_samples": price_series.len(),
            "extreme_prices_removed": removed,
            "levels_m": document.demand.levels_m,
            "period_T": fit.period_t,
        }),
    )?;
    println!(
        "fitted models: m={} demand levels, {} extreme prices removed",
        document.demand.levels_m, removed
    );
    Ok(())
}
