//! Ordinary least squares with an intercept column.

use nalgebra::{DMatrix, DVector};

use crate::data::DesignData;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub intercept: f64,
    pub slopes: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + crate::data::dot(x, &self.slopes)
    }
}

/// Least squares of `y` on `[1, X]`, ignoring event flags.
///
/// Solved through a QR factorisation; a diagonal of `R` that is negligible
/// relative to the largest one is reported as rank deficiency.
pub fn least_squares(data: &DesignData) -> Result<OlsFit> {
    let (n, d) = (data.n(), data.dim());
    if n < d + 1 {
        return Err(Error::RankDeficient);
    }
    let design = DMatrix::from_fn(n, d + 1, |i, k| if k == 0 { 1.0 } else { data.row(i)[k - 1] });
    let y = DVector::from_column_slice(data.y());
    let qr = design.qr();
    let r = qr.r();
    let scale = (0..=d).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..=d).any(|k| r[(k, k)].abs() <= 1e-10 * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::RankDeficient);
    }
    let qty = qr.q().transpose() * y;
    let coef = r.solve_upper_triangular(&qty).ok_or(Error::RankDeficient)?;
    Ok(OlsFit { intercept: coef[0], slopes: coef.iter().skip(1).copied().collect() })
}

/// OLS for the uncensored comparison: refuses data containing censored rows.
pub fn ols_fit(data: &DesignData) -> Result<OlsFit> {
    if data.n_events() != data.n() {
        return Err(Error::InvalidData("ordinary least squares needs fully observed responses".into()));
    }
    least_squares(data)
}
