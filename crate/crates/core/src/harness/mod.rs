//! Verification: deviation replay, invariant checks and the experiment runner.

pub mod experiment;
pub mod properties;
pub mod truthfulness;

use thiserror::Error;

use crate::generators::GenError;
use crate::mechanisms::MechanismError;
use crate::model::ModelError;

pub use experiment::{
    run_experiment, ExperimentResult, ExperimentRow, ExperimentSettings, MechanismSpec,
    MechanismSummary,
};
pub use properties::{
    check_bfm_half_supply, check_capacity, check_individual_rationality, check_price_floor,
    check_run_invariants, max_tasks_under_budget, probe_consumer_sovereignty, CheckReport,
    HalfSupplyCheck, Sovereignty, Violation,
};
pub use truthfulness::{
    default_bid_grid, default_time_grid, full_time_grid, random_misreports, test_cost_truthfulness,
    test_time_truthfulness, Deviation, DeviationReport, Instance,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Generator(#[from] GenError),
    #[error("{0}")]
    Mismatch(String),
    #[error("{mechanism} cannot run this instance: {reason}")]
    Incompatible { mechanism: String, reason: String },
}
