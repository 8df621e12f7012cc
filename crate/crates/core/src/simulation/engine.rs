use std::io::Write;

use rayon::prelude::*;

use super::scenario::{Scenario, Study};
use crate::cox::{fit_cox, predict_cox_mean, CoxOptions};
use crate::data::{DesignData, ObservedRecord};
use crate::distributions::SeedSpec;
use crate::error::{Error, Result};
use crate::gehan::{fit_aft, FitOptions};
use crate::ols::ols_fit;

/// `(1/n) sum (truth_i - prediction_i)^2`.
pub fn mse_p(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch { what: "predictions vs truths", left: predictions.len(), right: truths.len() });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidData("empty prediction set".into()));
    }
    Ok(predictions.iter().zip(truths).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / predictions.len() as f64)
}

/// Fraction of censored observations.
pub fn censoring_rate(data: &DesignData) -> f64 {
    (data.n() - data.n_events()) as f64 / data.n() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplicateOutcome {
    /// `(intercept, slopes...)` and the residual KM tail value.
    Estimation { estimate: Vec<f64>, tail_value: f64 },
    /// Test-set mean squared prediction errors.
    Prediction { linear: f64, cox: f64, ols: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub censoring_rate: f64,
    pub outcome: std::result::Result<ReplicateOutcome, Error>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    /// Parameter (`alpha`, `beta1`, ...) or model (`linear`, `cox`, `ols`).
    pub name: String,
    pub mean: f64,
    /// `None` with a single successful replicate.
    pub sd: Option<f64>,
    /// Prediction only: uncensored mean over this mean.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub scenario: String,
    pub study: Study,
    pub rows: Vec<SummaryRow>,
    pub censoring_rate: f64,
    pub failures: usize,
    pub replicates: usize,
    /// Estimation only: share of replicates whose residual tail is below 0.15.
    pub tail_adequate_rate: Option<f64>,
}

impl SummaryTable {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// `parameter,mean,sd,censoring_rate` for estimation, `model,ratio,mse,censoring_rate` for prediction.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let rate = self.censoring_rate.to_string();
        match self.study {
            Study::Estimation => {
                w.write_record(["parameter", "mean", "sd", "censoring_rate"])?;
                for r in &self.rows {
                    w.write_record([r.name.clone(), r.mean.to_string(), opt(r.sd), rate.clone()])?;
                }
            }
            Study::Prediction => {
                w.write_record(["model", "ratio", "mse", "censoring_rate"])?;
                for r in &self.rows {
                    w.write_record([r.name.clone(), opt(r.ratio), r.mean.to_string(), rate.clone()])?;
                }
            }
        }
        w.flush()
    }
}

/// Worker pool for replicate-level parallelism; `threads = None` uses the global pool.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Engine {
    pub threads: Option<usize>,
}

impl Engine {
    pub fn with_threads(threads: usize) -> Self {
        Self { threads: Some(threads) }
    }

    fn map<T: Send>(&self, count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
        let run = || (0..count).into_par_iter().map(&f).collect::<Vec<T>>();
        match self.threads {
            None => Ok(run()),
            Some(t) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
                Ok(pool.install(run))
            }
        }
    }

    pub fn run_estimation(&self, s: &Scenario) -> Result<SummaryTable> {
        expect_study(s, Study::Estimation)?;
        let results = self.map(s.replicates, |r| estimation_replicate(s, r))?;
        summarize(s, &results, None)
    }

    pub fn run_prediction(&self, s: &Scenario) -> Result<SummaryTable> {
        expect_study(s, Study::Prediction)?;
        let results = self.map(s.replicates, |r| prediction_replicate(s, r))?;
        let reference = if s.laws.censoring.is_uncensored() {
            None
        } else {
            let u = s.uncensored();
            let ref_results = self.map(u.replicates, |r| prediction_replicate(&u, r))?;
            Some(summarize(&u, &ref_results, None)?)
        };
        summarize(s, &results, reference.as_ref())
    }

    /// Raw per-replicate results, in replicate order.
    pub fn replicates(&self, s: &Scenario) -> Result<Vec<ReplicationResult>> {
        s.validate()?;
        match s.study {
            Study::Estimation => self.map(s.replicates, |r| estimation_replicate(s, r)),
            Study::Prediction => self.map(s.replicates, |r| prediction_replicate(s, r)),
        }
    }
}

pub fn run_estimation_scenario(s: &Scenario) -> Result<SummaryTable> {
    Engine::default().run_estimation(s)
}

pub fn run_prediction_scenario(s: &Scenario) -> Result<SummaryTable> {
    Engine::default().run_prediction(s)
}

fn expect_study(s: &Scenario, study: Study) -> Result<()> {
    s.validate()?;
    if s.study != study {
        return Err(Error::InvalidParameter(format!("scenario '{}' is a {:?} study", s.name, s.study)));
    }
    Ok(())
}

/// `n` subjects drawn from the scenario laws; also returns the latent failure times.
fn draw(s: &Scenario, rng: &mut rand_chacha::ChaCha8Rng) -> Result<(DesignData, Vec<f64>)> {
    let mut records: Vec<ObservedRecord> = Vec::with_capacity(s.n);
    let mut failure = Vec::with_capacity(s.n);
    for _ in 0..s.n {
        let subject = s.laws.sample_subject(rng);
        failure.push(subject.failure_time);
        records.push(subject.record);
    }
    Ok((DesignData::from_records(&records)?, failure))
}

fn fit_options(s: &Scenario) -> FitOptions {
    FitOptions { mode: s.mode, ..FitOptions::default() }
}

fn estimation_replicate(s: &Scenario, index: usize) -> ReplicationResult {
    let mut rng = SeedSpec::new(s.seed, index as u64).rng();
    let (data, _) = match draw(s, &mut rng) {
        Ok(d) => d,
        Err(e) => return ReplicationResult { index, censoring_rate: f64::NAN, outcome: Err(e) },
    };
    let outcome = fit_aft(&data, &fit_options(s)).map(|fit| {
        let mut estimate = vec![fit.intercept];
        estimate.extend(&fit.slopes);
        ReplicateOutcome::Estimation { estimate, tail_value: fit.tail.tail_value }
    });
    ReplicationResult { index, censoring_rate: censoring_rate(&data), outcome }
}

fn prediction_replicate(s: &Scenario, index: usize) -> ReplicationResult {
    let mut rng = SeedSpec::new(s.seed, index as u64).rng();
    let drawn = draw(s, &mut rng).and_then(|train| draw(s, &mut rng).map(|test| (train, test)));
    let ((train, _), (test, truth)) = match drawn {
        Ok(d) => d,
        Err(e) => return ReplicationResult { index, censoring_rate: f64::NAN, outcome: Err(e) },
    };
    let outcome = (|| {
        let aft = fit_aft(&train, &fit_options(s))?;
        let cox = fit_cox(&train, &CoxOptions::default())?;
        let rows: Vec<&[f64]> = (0..test.n()).map(|i| test.row(i)).collect();
        let linear: Vec<f64> = rows.iter().map(|x| aft.predict(x)).collect();
        let cox_pred: Vec<f64> = rows.iter().map(|x| predict_cox_mean(&cox, x)).collect();
        let ols = if train.n_events() == train.n() {
            let o = ols_fit(&train)?;
            let p: Vec<f64> = rows.iter().map(|x| o.predict(x)).collect();
            Some(mse_p(&p, &truth)?)
        } else {
            None
        };
        Ok(ReplicateOutcome::Prediction { linear: mse_p(&linear, &truth)?, cox: mse_p(&cox_pred, &truth)?, ols })
    })();
    ReplicationResult { index, censoring_rate: censoring_rate(&train), outcome }
}

fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let sd = (values.len() > 1).then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt());
    (mean, sd)
}

fn summarize(s: &Scenario, results: &[ReplicationResult], reference: Option<&SummaryTable>) -> Result<SummaryTable> {
    let failures = results.iter().filter(|r| r.outcome.is_err()).count();
    let limit = results.len() / 20;
    if failures > limit || failures == results.len() {
        return Err(Error::TooManyFailures { failed: failures, total: results.len(), limit });
    }
    let rates: Vec<f64> = results.iter().map(|r| r.censoring_rate).filter(|v| v.is_finite()).collect();
    let censoring_rate = rates.iter().sum::<f64>() / rates.len().max(1) as f64;
    let ok: Vec<&ReplicateOutcome> = results.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let mut rows = Vec::new();
    let mut tail_adequate_rate = None;
    match s.study {
        Study::Estimation => {
            let width = s.laws.slopes.len() + 1;
            let mut tails = Vec::new();
            let mut columns = vec![Vec::with_capacity(ok.len()); width];
            for o in &ok {
                if let ReplicateOutcome::Estimation { estimate, tail_value } = o {
                    for (c, v) in columns.iter_mut().zip(estimate) {
                        c.push(*v);
                    }
                    tails.push(*tail_value);
                }
            }
            for (k, c) in columns.iter().enumerate() {
                let (mean, sd) = mean_sd(c);
                let name = if k == 0 { "alpha".to_string() } else { format!("beta{k}") };
                rows.push(SummaryRow { name, mean, sd, ratio: None });
            }
            let adequate = tails.iter().filter(|t| **t < crate::survfit::DEFAULT_TAIL_THRESHOLD).count();
            tail_adequate_rate = Some(adequate as f64 / tails.len() as f64);
        }
        Study::Prediction => {
            let mut linear = Vec::new();
            let mut cox = Vec::new();
            let mut ols = Vec::new();
            for o in &ok {
                if let ReplicateOutcome::Prediction { linear: l, cox: c, ols: o } = o {
                    linear.push(*l);
                    cox.push(*c);
                    if let Some(v) = o {
                        ols.push(*v);
                    }
                }
            }
            for (name, values) in [("linear", &linear), ("cox", &cox), ("ols", &ols)] {
                if values.is_empty() {
                    continue;
                }
                let (mean, sd) = mean_sd(values);
                let ratio = match reference {
                    None => Some(1.0),
                    Some(r) => r.row(name).map(|u| u.mean / mean),
                };
                rows.push(SummaryRow { name: name.into(), mean, sd, ratio });
            }
        }
    }
    Ok(SummaryTable {
        scenario: s.name.clone(),
        study: s.study,
        rows,
        censoring_rate,
        failures,
        replicates: results.len(),
        tail_adequate_rate,
    })
}
