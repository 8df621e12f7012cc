//! Mean survival time estimation in the censored linear regression model.
//!
//! Slopes come from the Gehan-weighted rank estimating function, the
//! intercept from the mean of a truncated Kaplan–Meier estimate of the
//! residual distribution. A Cox proportional hazards comparator and a Monte
//! Carlo driver reproduce the estimation and prediction studies.

pub mod cli;
pub mod cox;
pub mod data;
pub mod distributions;
pub mod error;
pub mod gehan;
pub mod ols;
pub mod simulation;
pub mod survfit;

pub use data::{DesignData, ObservedRecord};
pub use error::{Error, Result};
pub use gehan::{bootstrap_se, fit_aft, gehan_loss, gehan_score, predict_aft, solve_gehan, AftFit, FitOptions};
pub use survfit::{km_fit, mean_of, tail_diagnostic, ResidualSample, StepDistribution, TruncationMode};
pub use cox::{breslow, cox_partial_loglik, fit_cox, predict_cox_mean, CoxFit, CoxOptions};
