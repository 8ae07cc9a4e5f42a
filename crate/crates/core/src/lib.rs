//! Co-design of water storage tank size and a price-threshold pumping policy.
//!
//! The tank volume under a threshold pumping policy evolves as a finite-state
//! Markov chain over `(volume index, phase)` states. This crate builds that
//! chain, solves the balance and normalization equations for its stationary
//! distribution, evaluates the long-run expected operating cost in closed
//! form, and minimizes capital-plus-operating cost over candidate tank sizes
//! with an SPSA-based derivative-free optimizer. A seeded Monte Carlo
//! simulator validates that realized time-average cost converges to the
//! expected cost.

pub mod chain;
pub mod cost;
pub mod error;
pub mod gaussian;
pub mod model;
pub mod optimize;
pub mod sensitivity;
pub mod series;
pub mod simulate;

pub use chain::{
    analytic_pi0_example1, build_chain, check_irreducible, stationary, visit_frequencies_match,
    ChainState, StationaryDistribution, TransitionMatrix,
};
pub use cost::{
    closed_form_applies, example1_operating_cost, expected_operating_cost, expected_state_cost,
    npv_codesign_cost, total_codesign_cost, truncated_mean, CostBreakdown,
};
pub use error::{Error, Result};
pub use model::{
    estimate_price_model, quantize_demand_series, validate_instance, BandRule, CapitalCost,
    ChainSpec, CostParams, GeometryRule, ModelDocument, PriceModel, QuantizedDemandModel,
    ThresholdPolicy, ValidationReport, VolumeRounding,
};
pub use optimize::{
    codesign_sweep, optimize_policy_for_tank, spsa_minimize, CandidateOutcome, CoDesignResult,
    PolicyForm, SpsaConfig,
};
pub use sensitivity::{sensitivity_fixed_design, sensitivity_misassumed_design, SensitivityRow};
pub use series::{read_series_csv, Sample};
pub use simulate::{convergence_report, simulate, simulate_observed, ConvergenceRow, SimResult, StepRecord};
