use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model constructor was handed values that violate its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The (demand, price, geometry) triple failed instance validation.
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Closed-form oracle invoked on a chain geometry it does not cover.
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    /// More than one closed communicating class: no unique stationary vector.
    #[error("stationary distribution not unique: {closed_classes} closed communicating classes")]
    ReducibleChain { closed_classes: usize },

    #[error("stationary solve failed: residual {residual:e} exceeds {tolerance:e}")]
    SolverResidual { residual: f64, tolerance: f64 },

    /// Threshold so far below the price support that the truncation mass underflows.
    #[error("degenerate truncation: cdf at threshold {alpha} is below 1e-300")]
    DegenerateTruncation { alpha: f64 },

    #[error("optimization failed: {0}")]
    Optimization(String),

    #[error("all candidates failed: {0}")]
    AllCandidatesFailed(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
