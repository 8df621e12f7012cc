//! Cox proportional hazards comparator with Breslow ties and baseline.
//!
//! The response column of [`DesignData`] is read as the observed time; it may
//! be negative.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::data::{dot, DesignData};
use crate::error::{Error, Result};

/// Runs of equal times, visited from the largest time down.
///
/// `visit(members, events)` sees the indices sharing one time value and the
/// subset of those that are events; risk sets are cumulative across calls.
fn descending_groups(y: &[f64], events: &[bool], mut visit: impl FnMut(&[usize], &[usize])) {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap_or(Ordering::Equal));
    let mut start = 0;
    let mut ev = Vec::new();
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && y[order[end]] == y[order[start]] {
            end += 1;
        }
        ev.clear();
        ev.extend(order[start..end].iter().copied().filter(|&i| events[i]));
        visit(&order[start..end], &ev);
        start = end;
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxDerivatives {
    pub loglik: f64,
    pub score: Vec<f64>,
    /// Observed information, minus the Hessian of the log partial likelihood.
    pub information: DMatrix<f64>,
}

/// Log partial likelihood with its score and information (Breslow ties).
pub fn cox_derivatives(beta: &[f64], data: &DesignData) -> CoxDerivatives {
    let d = data.dim();
    let eta = data.linear_predictor(beta);
    let mut log_s0 = f64::NEG_INFINITY;
    // risk-set weighted means of x and x x'
    let mut m1 = vec![0.0; d];
    let mut m2 = DMatrix::<f64>::zeros(d, d);
    let mut loglik = 0.0;
    let mut score = vec![0.0; d];
    let mut information = DMatrix::<f64>::zeros(d, d);
    descending_groups(data.y(), data.events(), |members, events| {
        for &j in members {
            let updated = log_add_exp(log_s0, eta[j]);
            let (a, b) = ((log_s0 - updated).exp(), (eta[j] - updated).exp());
            let xj = data.row(j);
            for k in 0..d {
                m1[k] = a * m1[k] + b * xj[k];
                for l in 0..d {
                    m2[(k, l)] = a * m2[(k, l)] + b * xj[k] * xj[l];
                }
            }
            log_s0 = updated;
        }
        if events.is_empty() {
            return;
        }
        let dk = events.len() as f64;
        for &i in events {
            loglik += eta[i] - log_s0;
            for (s, x) in score.iter_mut().zip(data.row(i)) {
                *s += x;
            }
        }
        for k in 0..d {
            score[k] -= dk * m1[k];
            for l in 0..d {
                information[(k, l)] += dk * (m2[(k, l)] - m1[k] * m1[l]);
            }
        }
    });
    CoxDerivatives { loglik, score, information }
}

/// `sum_{events} [x_i' beta - log sum_{Y_j >= Y_i} exp(x_j' beta)]`.
pub fn cox_partial_loglik(beta: &[f64], data: &DesignData) -> f64 {
    cox_derivatives(beta, data).loglik
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    /// Bound on `max_k |U_k|`; `None` means `1e-8 * n`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    /// Divergence bound on `|beta_k|`.
    pub bound: f64,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self { tol: None, max_iter: 200, bound: 50.0 }
    }
}

/// Breslow cumulative baseline hazard, a right-continuous step function.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineHazard {
    pub times: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl BaselineHazard {
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&u| u <= t);
        if k == 0 { 0.0 } else { self.cumulative[k - 1] }
    }

    pub fn jumps(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let j = c - prev;
                prev = c;
                j
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    pub baseline: BaselineHazard,
    /// Largest observed time; the predicted distribution puts its remaining mass here.
    pub t_max: f64,
    pub loglik: f64,
    pub score_norm: f64,
    pub iterations: usize,
}

impl CoxFit {
    /// `F(t | x) = 1 - exp(-L0(t) e^{x' beta})`, forced to one from `t_max` on.
    pub fn cdf(&self, t: f64, x: &[f64]) -> f64 {
        if t >= self.t_max {
            return 1.0;
        }
        1.0 - (-self.baseline.at(t) * dot(x, &self.beta).exp()).exp()
    }

    pub fn predict_mean(&self, x: &[f64]) -> f64 {
        predict_cox_mean(self, x)
    }
}

/// Breslow estimator `L0(t) = sum_{t_i <= t} d_i / sum_{Y_j >= t_i} exp(x_j' beta)`.
pub fn breslow(beta: &[f64], data: &DesignData) -> BaselineHazard {
    let eta = data.linear_predictor(beta);
    // one global shift keeps the sums exact integers at beta = 0
    let shift = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s0 = 0.0;
    let mut desc = Vec::new();
    descending_groups(data.y(), data.events(), |members, events| {
        for &j in members {
            s0 += (eta[j] - shift).exp();
        }
        if !events.is_empty() {
            desc.push((data.y()[members[0]], events.len() as f64 / s0 * (-shift).exp()));
        }
    });
    desc.reverse();
    let mut times = Vec::with_capacity(desc.len());
    let mut cumulative = Vec::with_capacity(desc.len());
    let mut acc = 0.0;
    for (t, jump) in desc {
        acc += jump;
        times.push(t);
        cumulative.push(acc);
    }
    BaselineHazard { times, cumulative }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn largest_coordinate(v: &[f64]) -> usize {
    (0..v.len()).max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap_or(Ordering::Equal)).unwrap_or(0)
}

/// Newton–Raphson with step-halving from `beta = 0`.
pub fn fit_cox(data: &DesignData, options: &CoxOptions) -> Result<CoxFit> {
    if data.n_events() == 0 {
        return Err(Error::NoEvents);
    }
    let d = data.dim();
    let tol = options.tol.unwrap_or(1e-8 * data.n() as f64);
    let mut beta = vec![0.0; d];
    let mut cur = cox_derivatives(&beta, data);
    for iteration in 1..=options.max_iter {
        let chol = cur.information.clone().cholesky();
        let Some(chol) = chol else {
            if inf_norm(&beta) == 0.0 {
                return Err(Error::RankDeficient);
            }
            // information vanished away from the origin: the likelihood keeps rising along beta
            return Err(Error::MonotoneLikelihood { coordinate: largest_coordinate(&beta), bound: options.bound, beta });
        };
        let step: Vec<f64> = chol.solve(&DVector::from_column_slice(&cur.score)).iter().copied().collect();
        let converged_score = inf_norm(&cur.score) <= tol;
        if converged_score && inf_norm(&step) <= 1e-6 * (1.0 + inf_norm(&beta)) {
            // one more full step: quadratic convergence takes the error to rounding level
            let polished: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + s).collect();
            let next = cox_derivatives(&polished, data);
            if next.loglik >= cur.loglik - 1e-12 * (1.0 + cur.loglik.abs()) && inf_norm(&next.score) <= inf_norm(&cur.score) {
                return Ok(finish(data, polished, next, iteration));
            }
            return Ok(finish(data, beta, cur, iteration - 1));
        }
        let slack = 1e-12 * (1.0 + cur.loglik.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let next = cox_derivatives(&cand, data);
            if next.loglik.is_finite() && next.loglik >= cur.loglik - slack {
                accepted = Some((cand, next));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            if converged_score {
                return Ok(finish(data, beta, cur, iteration));
            }
            return Err(Error::NonConvergence { iterations: iteration, best: beta, score_norm: inf_norm(&cur.score) });
        };
        beta = cand;
        cur = next;
        if inf_norm(&beta) > options.bound {
            return Err(Error::MonotoneLikelihood { coordinate: largest_coordinate(&beta), bound: options.bound, beta });
        }
    }
    Err(Error::NonConvergence { iterations: options.max_iter, best: beta, score_norm: inf_norm(&cur.score) })
}

fn finish(data: &DesignData, beta: Vec<f64>, cur: CoxDerivatives, iterations: usize) -> CoxFit {
    let t_max = data.y().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    CoxFit {
        baseline: breslow(&beta, data),
        beta,
        t_max,
        loglik: cur.loglik,
        score_norm: inf_norm(&cur.score),
        iterations,
    }
}

/// `int t dF(t | x)` over the jumps of `F` before `t_max` plus the forced atom at `t_max`.
pub fn predict_cox_mean(fit: &CoxFit, x: &[f64]) -> f64 {
    let risk = dot(x, &fit.beta).exp();
    let mut mean = 0.0;
    let mut prev = 0.0;
    for (&t, &h) in fit.baseline.times.iter().zip(&fit.baseline.cumulative) {
        if t >= fit.t_max {
            break;
        }
        let f = -(-h * risk).exp_m1();
        mean += t * (f - prev);
        prev = f;
    }
    mean + fit.t_max * (1.0 - prev)
}
