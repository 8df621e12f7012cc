use rand::Rng;
use rayon::prelude::*;

use super::{fit_aft, FitOptions};
use crate::data::DesignData;
use crate::distributions::SeedSpec;
use crate::error::{Error, Result};

/// Nonparametric bootstrap standard errors of `(intercept, slopes...)`.
///
/// Resample `b` draws its subjects from stream `b` of `seed`, so the result
/// does not depend on the number of worker threads. Resamples whose fit fails
/// are dropped; more than 20% failures is an error.
pub fn bootstrap_se(data: &DesignData, b: usize, seed: u64, options: &FitOptions) -> Result<Vec<f64>> {
    if b < 2 {
        return Err(Error::InvalidParameter(format!("bootstrap needs at least 2 resamples, got {b}")));
    }
    let n = data.n();
    let estimates: Vec<Option<Vec<f64>>> = (0..b as u64)
        .into_par_iter()
        .map(|stream| {
            let mut rng = SeedSpec::new(seed, stream).rng();
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_aft(&data.select(&idx), options).ok().map(|f| {
                let mut v = vec![f.intercept];
                v.extend(f.slopes);
                v
            })
        })
        .collect();
    let ok: Vec<Vec<f64>> = estimates.into_iter().flatten().collect();
    let failed = b - ok.len();
    let limit = b / 5;
    if failed > limit || ok.len() < 2 {
        return Err(Error::TooManyFailures { failed, total: b, limit });
    }
    Ok(column_sd(&ok))
}

/// Coordinate-wise sample standard deviation with the `m - 1` divisor.
pub(crate) fn column_sd(rows: &[Vec<f64>]) -> Vec<f64> {
    let m = rows.len() as f64;
    let width = rows[0].len();
    (0..width)
        .map(|k| {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / m;
            (rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_sd() {
        let sd = column_sd(&[vec![1.0, 3.0], vec![4.0, 3.0]]);
        assert!((sd[0] - 3.0 / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(sd[1], 0.0);
    }

    #[test]
    fn rejects_single_resample() {
        let data = DesignData::new(vec![1.0, 2.0], vec![true, true], vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(bootstrap_se(&data, 1, 0, &FitOptions::default()), Err(Error::InvalidParameter(_))));
    }
}
