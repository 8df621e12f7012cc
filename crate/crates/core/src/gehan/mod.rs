//! Semiparametric AFT fitting: Gehan rank slopes plus a KM-mean intercept.

mod bootstrap;
mod score;
mod solver;

pub use bootstrap::bootstrap_se;
pub use score::{gehan_loss, gehan_score};
pub use solver::{solve_gehan, GehanSolution, SolverOptions, SolverReport};

use crate::data::{dot, DesignData};
use crate::error::{Error, Result};
use crate::ols::least_squares;
use crate::survfit::{km_fit, tail_diagnostic, ResidualSample, StepDistribution, TailDiagnostic, TruncationMode, DEFAULT_TAIL_THRESHOLD};

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub mode: TruncationMode,
    pub tail_threshold: f64,
    pub solver: SolverOptions,
    /// Starting slopes; least squares on the observed responses when absent.
    pub init: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            mode: TruncationMode::default(),
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
            solver: SolverOptions::default(),
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AftFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    /// Bootstrap standard errors ordered `(intercept, slopes...)`.
    pub se: Option<Vec<f64>>,
    pub residual_distribution: StepDistribution,
    pub tail: TailDiagnostic,
    pub report: SolverReport,
}

impl AftFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(x, &self.slopes)
    }
}

pub fn predict_aft(fit: &AftFit, x: &[f64]) -> f64 {
    fit.predict(x)
}

fn initial_slopes(data: &DesignData) -> Vec<f64> {
    match least_squares(data) {
        Ok(f) if f.slopes.iter().all(|b| b.is_finite()) => f.slopes,
        _ => vec![0.0; data.dim()],
    }
}

/// Fits `Y = alpha + X beta + error` under right censoring.
///
/// A sample without events has no estimable residual distribution and is
/// rejected with [`Error::DegenerateKm`] before any slope search.
pub fn fit_aft(data: &DesignData, options: &FitOptions) -> Result<AftFit> {
    if data.n_events() == 0 {
        return Err(Error::DegenerateKm);
    }
    let init = options.init.clone().unwrap_or_else(|| initial_slopes(data));
    let GehanSolution { beta, report } = solve_gehan(data, &init, &options.solver)?;
    let residuals = data.residuals(&beta);
    let sample = ResidualSample::new(&residuals, data.events())?;
    let dist = km_fit(&sample, options.mode)?;
    Ok(AftFit {
        intercept: dist.mean(),
        slopes: beta,
        se: None,
        tail: tail_diagnostic(&dist, options.tail_threshold),
        residual_distribution: dist,
        report,
    })
}
