//! Gehan-weighted rank estimating function and its convex loss.
//!
//! Both are evaluated in `O(n log n + n d)` by sorting residuals and running
//! suffix sums over the risk sets `{j : e_j >= e_i}`.

use std::cmp::Ordering;

use crate::data::DesignData;

/// Indices that sort `e` ascending.
fn ascending(e: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..e.len()).collect();
    order.sort_unstable_by(|&a, &b| e[a].partial_cmp(&e[b]).unwrap_or(Ordering::Equal));
    order
}

/// Calls `visit(i, at_risk, sum)` for every event `i`, where `at_risk` counts
/// `{j : e_j >= e_i}` and `sum` holds what `add` accumulated over that set.
/// Residuals within `tie_tol` of the largest member of a run count as tied.
fn for_each_event_risk_set(
    e: &[f64],
    events: &[bool],
    tie_tol: f64,
    width: usize,
    mut add: impl FnMut(usize, &mut [f64]),
    mut visit: impl FnMut(usize, usize, &[f64]),
) {
    let order = ascending(e);
    let n = e.len();
    let mut sum = vec![0.0; width];
    let mut at_risk = 0;
    let mut end = n;
    while end > 0 {
        let v = e[order[end - 1]];
        let mut start = end - 1;
        while start > 0 && v - e[order[start - 1]] <= tie_tol {
            start -= 1;
        }
        for &j in &order[start..end] {
            add(j, &mut sum);
            at_risk += 1;
        }
        for &i in &order[start..end] {
            if events[i] {
                visit(i, at_risk, &sum);
            }
        }
        end = start;
    }
}

/// `n^-2 sum_i sum_j D_i 1(e_j >= e_i) (X_i - X_j)` at `e = Y - X beta`.
pub fn gehan_score(beta: &[f64], data: &DesignData) -> Vec<f64> {
    let e = data.residuals(beta);
    score_at_residuals(&e, data, 0.0)
}

/// Score with residuals closer than the rounding error of `Y - X beta` treated
/// as tied, so that tied event pairs cancel instead of following rounding noise.
pub(crate) fn rounding_robust_score(beta: &[f64], data: &DesignData) -> Vec<f64> {
    let e = data.residuals(beta);
    let scale = data.y().iter().zip(&e).map(|(y, r)| y.abs() + (y - r).abs()).fold(0.0, f64::max);
    score_at_residuals(&e, data, 1e-12 * scale)
}

pub(crate) fn score_at_residuals(e: &[f64], data: &DesignData, tie_tol: f64) -> Vec<f64> {
    let d = data.dim();
    let n = data.n() as f64;
    let mut psi = vec![0.0; d];
    for_each_event_risk_set(
        e,
        data.events(),
        tie_tol,
        d,
        |j, sum| {
            for (s, x) in sum.iter_mut().zip(data.row(j)) {
                *s += x;
            }
        },
        |i, r, sum| {
            for ((p, x), s) in psi.iter_mut().zip(data.row(i)).zip(sum) {
                *p += r as f64 * x - s;
            }
        },
    );
    psi.iter_mut().for_each(|p| *p /= n * n);
    psi
}

/// Convex piecewise-linear loss `n^-2 sum_i sum_j D_i max(e_j - e_i, 0)`.
///
/// Its gradient between kinks equals [`gehan_score`].
pub fn gehan_loss(beta: &[f64], data: &DesignData) -> f64 {
    let e = data.residuals(beta);
    loss_at_residuals(&e, data.events())
}

pub(crate) fn loss_at_residuals(e: &[f64], events: &[bool]) -> f64 {
    let n = e.len() as f64;
    // centring keeps the suffix sums small relative to the differences
    let center = e.iter().sum::<f64>() / n;
    let mut total = 0.0;
    for_each_event_risk_set(
        e,
        events,
        0.0,
        1,
        |j, sum| sum[0] += e[j] - center,
        |i, r, sum| total += sum[0] - r as f64 * (e[i] - center),
    );
    total / (n * n)
}

/// One-dimensional score for response `y` and covariate `x` at slope `t`.
pub(crate) fn score_1d(y: &[f64], x: &[f64], events: &[bool], t: f64, e: &mut Vec<f64>) -> f64 {
    e.clear();
    e.extend(y.iter().zip(x).map(|(a, b)| a - t * b));
    let n = y.len() as f64;
    let mut psi = 0.0;
    for_each_event_risk_set(e, events, 0.0, 1, |j, sum| sum[0] += x[j], |i, r, sum| psi += r as f64 * x[i] - sum[0]);
    psi / (n * n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let data = DesignData::new(vec![1.0, 2.0, 3.0], vec![true; 3], vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!((gehan_score(&[0.0], &data)[0] + 4.0 / 9.0).abs() < 1e-15);
        assert!(gehan_score(&[1.0], &data)[0].abs() < 1e-15);
        assert!((gehan_score(&[2.0], &data)[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn rounding_ties_cancel() {
        // 0.1 * 3 is not exactly 0.3, so the residuals at beta = 0.1 differ by an ulp
        let data = DesignData::new(vec![0.1, 0.2, 0.3], vec![true; 3], vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        assert_eq!(rounding_robust_score(&[0.1], &data), vec![0.0]);
    }

    #[test]
    fn single_subject_and_identical_rows() {
        let one = DesignData::new(vec![1.0], vec![true], vec![vec![3.0, 4.0]]).unwrap();
        assert_eq!(gehan_score(&[0.5, -1.0], &one), vec![0.0, 0.0]);
        let same = DesignData::new(vec![1.0, 5.0, 2.0], vec![true, false, true], vec![vec![1.0]; 3]).unwrap();
        for b in [-3.0, 0.0, 2.5] {
            assert_eq!(gehan_score(&[b], &same), vec![0.0]);
        }
    }

    #[test]
    fn two_point_loss() {
        let data = DesignData::new(vec![0.0, 1.0], vec![true, true], vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(gehan_loss(&[1.0], &data), 0.0);
        for b in [-1.0, 0.0, 0.5, 2.0, 4.0] {
            assert!((gehan_loss(&[b], &data) - (1.0f64 - b).abs() / 4.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_linear_data_has_zero_loss() {
        let x: Vec<f64> = (0..10).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 + v).collect();
        let data = DesignData::new(y, vec![true; 10], x.into_iter().map(|v| vec![v]).collect()).unwrap();
        assert!(gehan_loss(&[1.0], &data).abs() < 1e-15);
    }
}
