//! Scenario-driven simulation, Monte Carlo campaigns, verification of the
//! predicted bounds, and file export.

mod campaign;
mod export;
mod scenario;
mod sim;

use thiserror::Error;

use crate::actuation::ActuationError;
use crate::bounds::BoundError;
use crate::estimation::EstimationError;

pub use campaign::{
    instance_seed, run_campaign, run_campaign_with, steady_state_stats, verify, CampaignSummary,
    InstanceSummary, Margins, PredictedBounds, SteadyStateStats, VerifyReport,
};
pub use export::{
    bound_trace_records, read_jsonl, read_trace_csv, trace_columns, write_bound_trace_jsonl,
    write_campaign_jsonl, write_plot_data, write_trace_csv,
};
pub use scenario::{
    ActuatorSpec, CoefficientOverride, InitialConditions, ModelSpec, ObserverSpec, Scenario,
    SensorSpec, TrajectorySpec,
};
pub use sim::{run_scenario, RunTrace, TraceSample};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Actuation(#[from] ActuationError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error("state became non-finite at step {step} (t = {t} s)")]
    NonFinite { step: usize, t: f64 },
    #[error("tail window contains no samples")]
    EmptyTail,
    #[error("tail fraction must lie in (0, 1], got {0}")]
    InvalidTailFraction(f64),
    #[error("instance {instance}: {quantity} = {observed:e} exceeds predicted bound {bound:e}")]
    BoundViolated {
        instance: usize,
        quantity: &'static str,
        observed: f64,
        bound: f64,
    },
    #[error("instance {instance} failed: {message}")]
    InstanceFailed { instance: usize, message: String },
}
