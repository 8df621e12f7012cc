//! Monte Carlo studies: intercept/slope recovery and linear-vs-Cox prediction.
//!
//! Replicate `r` of a scenario draws everything from stream `r` of the master
//! seed, so summaries do not depend on the number of worker threads.

mod engine;
mod scenario;

pub use crate::ols::{ols_fit, OlsFit};
pub use engine::{
    censoring_rate, mse_p, run_estimation_scenario, run_prediction_scenario, Engine, ReplicateOutcome, ReplicationResult, SummaryRow,
    SummaryTable,
};
pub use scenario::{PredictionCovariate, Scenario, SecondCovariate, Study, PREDICTION_INTERCEPT};
