//! Kaplan–Meier estimation on residuals with a truncation point and a finite mean.
//!
//! The product-limit curve is forced to one at the truncation point `T_n`: all
//! survival left just before `T_n` becomes an atom at `T_n`, which makes the
//! distribution proper and its mean finite even when the largest residual is
//! censored.

use std::cmp::Ordering;
use std::io::Write;

use crate::error::{Error, Result};

/// Default threshold of the residual tail rule of thumb.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 0.15;

/// Residual/event pairs sorted ascending, events before censorings at ties.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSample {
    values: Vec<f64>,
    events: Vec<bool>,
}

impl ResidualSample {
    pub fn new(residuals: &[f64], events: &[bool]) -> Result<Self> {
        if residuals.len() != events.len() {
            return Err(Error::LengthMismatch {
                what: "residuals vs events",
                left: residuals.len(),
                right: events.len(),
            });
        }
        if residuals.is_empty() {
            return Err(Error::InvalidData("empty residual sample".into()));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidData("non-finite residual".into()));
        }
        let mut order: Vec<usize> = (0..residuals.len()).collect();
        // stable: original order kept within (value, flag) ties
        order.sort_by(|&a, &b| {
            residuals[a]
                .partial_cmp(&residuals[b])
                .unwrap_or(Ordering::Equal)
                .then(events[b].cmp(&events[a]))
        });
        Ok(Self {
            values: order.iter().map(|&i| residuals[i]).collect(),
            events: order.iter().map(|&i| events[i]).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn risk_counts(&self) -> RiskCounts {
        let n = self.values.len();
        let mut values = Vec::new();
        let mut events = Vec::new();
        let mut at_risk = Vec::new();
        let mut i = 0;
        while i < n {
            let u = self.values[i];
            let mut j = i;
            let mut d = 0;
            while j < n && self.values[j] == u {
                d += usize::from(self.events[j]);
                j += 1;
            }
            values.push(u);
            events.push(d);
            at_risk.push(n - i);
            i = j;
        }
        RiskCounts { values, events, at_risk, n }
    }
}

/// Event and at-risk counts at each distinct residual value.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskCounts {
    pub values: Vec<f64>,
    pub events: Vec<usize>,
    /// `#{i : e_i >= u}`
    pub at_risk: Vec<usize>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum TruncationMode {
    /// Remaining mass at the largest residual.
    #[default]
    MaxObserved,
    /// `T_n` = largest residual whose at-risk fraction is at least `n^-epsilon`.
    Theoretical { epsilon: f64 },
}

impl TruncationMode {
    pub const DEFAULT_EPSILON: f64 = 0.125;

    pub fn theoretical(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon <= 1.0 {
            Ok(Self::Theoretical { epsilon })
        } else {
            Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1], got {epsilon}")))
        }
    }
}

/// Largest residual `u` with `r(u) / n >= n^-epsilon`.
pub fn truncation_time(counts: &RiskCounts, n: usize, epsilon: f64) -> f64 {
    let threshold = (n as f64).powf(-epsilon);
    counts
        .values
        .iter()
        .zip(&counts.at_risk)
        .rev()
        .find(|&(_, &r)| r as f64 / n as f64 >= threshold)
        .map_or_else(|| *counts.values.last().expect("nonempty counts"), |(&u, _)| u)
}

/// Right-continuous step distribution with a terminal atom at the truncation point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    locations: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
    truncation: f64,
    tail: f64,
}

/// One row of the exported curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub t: f64,
    pub cdf: f64,
    pub survival: f64,
}

impl StepDistribution {
    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn truncation_point(&self) -> f64 {
        self.truncation
    }

    /// Survival just before the truncation point, `1 - F(T_n-)`.
    pub fn tail_value(&self) -> f64 {
        self.tail
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t >= self.truncation {
            return 1.0;
        }
        let k = self.locations.partition_point(|&u| u <= t);
        if k == 0 { 0.0 } else { self.cumulative[k - 1] }
    }

    pub fn survival(&self, t: f64) -> f64 {
        1.0 - self.cdf(t)
    }

    pub fn mean(&self) -> f64 {
        mean_of(self)
    }

    pub fn curve(&self) -> Vec<CurvePoint> {
        self.locations
            .iter()
            .zip(&self.cumulative)
            .map(|(&t, &f)| CurvePoint { t, cdf: f, survival: 1.0 - f })
            .collect()
    }

    /// Writes `t,cdf,survival` rows at every jump.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "cdf", "survival"])?;
        for p in self.curve() {
            w.write_record([p.t.to_string(), p.cdf.to_string(), p.survival.to_string()])?;
        }
        w.flush()
    }
}

/// Product-limit estimate of the residual distribution.
pub fn km_fit(sample: &ResidualSample, mode: TruncationMode) -> Result<StepDistribution> {
    if !sample.events.iter().any(|&e| e) {
        return Err(Error::DegenerateKm);
    }
    let counts = sample.risk_counts();
    let truncation = match mode {
        TruncationMode::MaxObserved => *counts.values.last().expect("nonempty"),
        TruncationMode::Theoretical { epsilon } => truncation_time(&counts, counts.n, epsilon),
    };

    let mut locations = Vec::new();
    let mut masses = Vec::new();
    let mut surv = 1.0;
    for ((&u, &d), &r) in counts.values.iter().zip(&counts.events).zip(&counts.at_risk) {
        if u >= truncation {
            break;
        }
        if d == 0 {
            continue;
        }
        let next = surv * (1.0 - d as f64 / r as f64);
        locations.push(u);
        masses.push(surv - next);
        surv = next;
    }
    let tail = surv;
    if tail > 0.0 || locations.is_empty() {
        locations.push(truncation);
        masses.push(tail);
    }
    let mut cumulative = Vec::with_capacity(masses.len());
    let mut acc = 0.0;
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    if let Some(last) = cumulative.last_mut() {
        *last = 1.0;
    }
    Ok(StepDistribution { locations, masses, cumulative, truncation, tail })
}

/// `sum_k t_k * dF(t_k)`, including the atom at the truncation point.
pub fn mean_of(dist: &StepDistribution) -> f64 {
    dist.locations.iter().zip(&dist.masses).map(|(t, m)| t * m).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailDiagnostic {
    pub tail_value: f64,
    pub threshold: f64,
    pub adequate: bool,
}

/// Rule of thumb: the residual survival curve should drop below `threshold` before truncation.
pub fn tail_diagnostic(dist: &StepDistribution, threshold: f64) -> TailDiagnostic {
    let tail_value = dist.tail_value();
    TailDiagnostic { tail_value, threshold, adequate: tail_value < threshold }
}
