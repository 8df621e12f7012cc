//! Right-censored regression samples.

use crate::error::{Error, Result};

/// One subject: observed time `y = min(T, C)`, event flag `1(T <= C)` and covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRecord {
    pub y: f64,
    pub event: bool,
    pub x: Vec<f64>,
}

/// A full right-censored sample with an `n x d` covariate matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignData {
    y: Vec<f64>,
    event: Vec<bool>,
    x: Vec<f64>,
    dim: usize,
}

impl DesignData {
    /// Builds a sample from row-major covariates (`x.len() == y.len() * dim`).
    pub fn from_flat(y: Vec<f64>, event: Vec<bool>, x: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidData("at least one covariate is required".into()));
        }
        if y.is_empty() {
            return Err(Error::InvalidData("empty sample".into()));
        }
        if y.len() != event.len() {
            return Err(Error::LengthMismatch {
                what: "response vs event flags",
                left: y.len(),
                right: event.len(),
            });
        }
        if x.len() != y.len() * dim {
            return Err(Error::LengthMismatch {
                what: "covariate entries vs n * d",
                left: x.len(),
                right: y.len() * dim,
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("response of row {i} is not finite")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "covariate {} of row {} is not finite",
                k % dim,
                k / dim
            )));
        }
        Ok(Self { y, event, x, dim })
    }

    pub fn new(y: Vec<f64>, event: Vec<bool>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "covariate row width",
                left: rows[i].len(),
                right: dim,
            });
        }
        if rows.len() != y.len() {
            return Err(Error::LengthMismatch {
                what: "covariate rows vs response",
                left: rows.len(),
                right: y.len(),
            });
        }
        Self::from_flat(y, event, rows.concat(), dim)
    }

    pub fn from_records(records: &[ObservedRecord]) -> Result<Self> {
        let y = records.iter().map(|r| r.y).collect();
        let event = records.iter().map(|r| r.event).collect();
        let rows = records.iter().map(|r| r.x.clone()).collect();
        Self::new(y, event, rows)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn events(&self) -> &[bool] {
        &self.event
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn x_flat(&self) -> &[f64] {
        &self.x
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().skip(k).step_by(self.dim).copied()
    }

    pub fn n_events(&self) -> usize {
        self.event.iter().filter(|&&e| e).count()
    }

    /// `x_i' beta` for every row.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        debug_assert_eq!(beta.len(), self.dim);
        self.x
            .chunks_exact(self.dim)
            .map(|row| dot(row, beta))
            .collect()
    }

    /// Residuals `y_i - x_i' beta`.
    pub fn residuals(&self, beta: &[f64]) -> Vec<f64> {
        self.linear_predictor(beta)
            .into_iter()
            .zip(&self.y)
            .map(|(lp, y)| y - lp)
            .collect()
    }

    /// Rows selected by index, repeats allowed (bootstrap resamples).
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut x = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            x.extend_from_slice(self.row(i));
        }
        Self {
            y: idx.iter().map(|&i| self.y[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
            x,
            dim: self.dim,
        }
    }

    /// The sample with row `i` removed.
    pub fn without(&self, i: usize) -> Self {
        let idx: Vec<usize> = (0..self.n()).filter(|&j| j != i).collect();
        self.select(&idx)
    }

    pub fn with_response(&self, y: Vec<f64>) -> Result<Self> {
        Self::from_flat(y, self.event.clone(), self.x.clone(), self.dim)
    }

    pub fn records(&self) -> impl Iterator<Item = ObservedRecord> + '_ {
        (0..self.n()).map(|i| ObservedRecord {
            y: self.y[i],
            event: self.event[i],
            x: self.row(i).to_vec(),
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}
