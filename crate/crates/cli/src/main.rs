//! `wdsco`: co-design of water storage size and price-threshold pump control.
//!
//! Every subcommand reads one JSON run config, writes its artifacts under
//! the output directory together with a provenance manifest, and exits
//! nonzero with a machine-readable error JSON on stderr if anything fails
//! (removing partial outputs first).

mod commands;
mod config;
mod output;
mod paper_suite;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands::TaskInputs;
use crate::config::RunConfig;
use crate::output::OutputStage;

#[derive(Parser)]
#[command(name = "wdsco", version, about = "Tank-size and pump-threshold co-design")]
struct Cli {
    /// Run the built-in reproduction of the published co-design studies and
    /// exit with a pass/fail summary.
    #[arg(long)]
    paper_suite: bool,

    /// Output directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Base seed overriding the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = auto).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct ConfigArg {
    /// Path to the JSON run config.
    config: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the JSON run config.
    config: PathBuf,
    /// Comma-separated candidate tank sizes overriding the config.
    #[arg(long, value_delimiter = ',')]
    candidates: Vec<f64>,
    /// SPSA iterations overriding the config.
    #[arg(long)]
    iterations: Option<usize>,
    /// SPSA restarts overriding the config.
    #[arg(long)]
    restarts: Option<usize>,
    /// Threshold box `lo,hi` overriding the config.
    #[arg(long = "box", value_delimiter = ',', num_args = 2)]
    box_bounds: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check every model and geometry invariant of the instance.
    Validate(ConfigArg),
    /// Build the volume chain and dump its transitions.
    Chain(ConfigArg),
    /// Solve for the stationary distribution and dump it.
    Stationary(ConfigArg),
    /// Expected cost breakdown for the configured tank size and policy.
    Evaluate(ConfigArg),
    /// Optimize the threshold policy for one tank size.
    Optimize(SweepArgs),
    /// Sweep candidate tank sizes for the minimum total cost design.
    Codesign(SweepArgs),
    /// Monte Carlo runs with an ergodic convergence report.
    Simulate {
        #[command(flatten)]
        config: ConfigArg,
        /// Also dump the first run's step-by-step trajectory.
        #[arg(long)]
        trajectory: bool,
    },
    /// Price-distribution sensitivity studies (re-priced fixed design and
    /// misassumed designs).
    Sensitivity(ConfigArg),
    /// Total-cost surface over a (tank size, threshold) grid.
    Surface(ConfigArg),
    /// Estimate demand and price models from CSV time series.
    Fit(ConfigArg),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Chain(_) => "chain",
            Command::Stationary(_) => "stationary",
            Command::Evaluate(_) => "evaluate",
            Command::Optimize(_) => "optimize",
            Command::Codesign(_) => "codesign",
            Command::Simulate { .. } => "simulate",
            Command::Sensitivity(_) => "sensitivity",
            Command::Surface(_) => "surface",
            Command::Fit(_) => "fit",
        }
    }

    fn config_path(&self) -> &PathBuf {
        match self {
            Command::Validate(args)
            | Command::Chain(args)
            | Command::Stationary(args)
            | Command::Evaluate(args)
            | Command::Sensitivity(args)
            | Command::Surface(args)
            | Command::Fit(args) => &args.config,
            Command::Optimize(args) | Command::Codesign(args) => &args.config,
            Command::Simulate { config, .. } => &config.config,
        }
    }
}

fn apply_sweep_overrides(config: &mut RunConfig, args: &SweepArgs) -> Result<()> {
    if !args.candidates.is_empty() {
        config.task.candidates = args.candidates.clone();
    }
    if args.iterations.is_some() {
        config.task.spsa.iterations = args.iterations;
    }
    if args.restarts.is_some() {
        config.task.spsa.restarts = args.restarts;
    }
    match args.box_bounds.as_slice() {
        [] => {}
        [lo, hi] => config.task.spsa.box_bounds = Some((*lo, *hi)),
        _ => bail!("--box expects exactly two values: lo,hi"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    }

    if cli.paper_suite {
        return paper_suite::run(cli.seed.unwrap_or(20260810));
    }

    let Some(command) = &cli.command else {
        bail!("a subcommand (or --paper-suite) is required; see --help");
    };

    let (mut config, config_bytes) = RunConfig::load(command.config_path())?;
    match command {
        Command::Optimize(args) | Command::Codesign(args) => {
            apply_sweep_overrides(&mut config, args)?
        }
        _ => {}
    }

    let out_dir = config.out_dir.clone().unwrap_or_else(|| cli.out.clone());
    let mut stage = OutputStage::new(&out_dir)?;
    let inputs = TaskInputs {
        config: &config,
        seed_override: cli.seed,
        trajectory: matches!(command, Command::Simulate { trajectory: true, .. }),
    };

    let outcome = match command {
        Command::Validate(_) => commands::run_validate(&inputs, &mut stage),
        Command::Chain(_) => commands::run_chain(&inputs, &mut stage),
        Command::Stationary(_) => commands::run_stationary(&inputs, &mut stage),
        Command::Evaluate(_) => commands::run_evaluate(&inputs, &mut stage),
        Command::Optimize(_) => commands::run_optimize(&inputs, &mut stage),
        Command::Codesign(_) => commands::run_codesign(&inputs, &mut stage),
        Command::Simulate { .. } => commands::run_simulate(&inputs, &mut stage),
        Command::Sensitivity(_) => commands::run_sensitivity(&inputs, &mut stage),
        Command::Surface(_) => commands::run_surface(&inputs, &mut stage),
        Command::Fit(_) => commands::run_fit(&inputs, &mut stage),
    };

    match outcome {
        Ok(()) => {
            let artifacts =
                stage.finish(command.name(), &config_bytes, cli.seed, cli.threads)?;
            println!("wrote {} artifacts to {}", artifacts.len(), out_dir.display());
            Ok(())
        }
        Err(e) => {
            stage.discard();
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let payload = serde_json::json!({
                "error": {
                    "kind": e.root_cause().to_string(),
                    "message": format!("{e:#}"),
                }
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
