//! Slow reference implementations written straight from the definitions.
#![allow(dead_code)]

use aftmean::DesignData;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// `F(t) = 1 - prod_{i: e_i <= t} (1 - (D_i / n) / H(e_i))`, `H(s) = #{j : e_j >= s} / n`.
pub fn km_cdf_direct(res: &[f64], ev: &[bool], t: f64) -> f64 {
    let n = res.len() as f64;
    let mut prod = 1.0;
    for (i, &ei) in res.iter().enumerate() {
        if ei <= t {
            let h = res.iter().filter(|&&r| r >= ei).count() as f64 / n;
            let d = if ev[i] { 1.0 / n } else { 0.0 };
            prod *= 1.0 - d / h;
        }
    }
    1.0 - prod
}

/// Mean of the direct KM with the mass left before `tn` placed at `tn`.
pub fn km_mean_direct(res: &[f64], ev: &[bool], tn: f64) -> f64 {
    let mut values: Vec<f64> = res.iter().copied().filter(|&v| v < tn).collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let mut mean = 0.0;
    let mut prev = 0.0;
    for v in values {
        let f = km_cdf_direct(res, ev, v);
        mean += v * (f - prev);
        prev = f;
    }
    mean + tn * (1.0 - prev)
}

/// The literal double sum `n^-2 sum_i sum_j D_i 1(e_j >= e_i) (X_i - X_j)`.
pub fn gehan_score_brute(beta: &[f64], data: &DesignData) -> Vec<f64> {
    let e = data.residuals(beta);
    let n = data.n();
    let mut psi = vec![0.0; data.dim()];
    for i in 0..n {
        if !data.events()[i] {
            continue;
        }
        for j in 0..n {
            if e[j] >= e[i] {
                for (k, p) in psi.iter_mut().enumerate() {
                    *p += data.row(i)[k] - data.row(j)[k];
                }
            }
        }
    }
    psi.iter().map(|p| p / (n * n) as f64).collect()
}

/// `n^-2 sum_i sum_j D_i max(e_j - e_i, 0)` by enumeration.
pub fn gehan_loss_brute(beta: &[f64], data: &DesignData) -> f64 {
    let e = data.residuals(beta);
    let n = data.n();
    let mut total = 0.0;
    for i in 0..n {
        if data.events()[i] {
            for j in 0..n {
                total += (e[j] - e[i]).max(0.0);
            }
        }
    }
    total / (n * n) as f64
}

/// Random censored design with `n` rows and `d` covariates.
pub fn random_design(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DesignData {
    loop {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| 1.0 + r.iter().sum::<f64>() + rng.random_range(-1.5..1.5)).collect();
        let ev: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        if ev.iter().any(|&e| e) {
            return DesignData::new(y, ev, rows).unwrap();
        }
    }
}

/// Cox score for one covariate: `sum_events [x_i - sum_{Y_j >= Y_i} x_j w_j / sum w_j]`, `w = exp(beta x)`.
pub fn cox_score_1d(beta: f64, y: &[f64], ev: &[bool], x: &[f64]) -> f64 {
    let mut u = 0.0;
    for i in 0..y.len() {
        if !ev[i] {
            continue;
        }
        let (mut s0, mut s1) = (0.0, 0.0);
        for j in 0..y.len() {
            if y[j] >= y[i] {
                let w = (beta * x[j]).exp();
                s0 += w;
                s1 += w * x[j];
            }
        }
        u += x[i] - s1 / s0;
    }
    u
}

/// Root of a decreasing function on `[lo, hi]` by bisection, or `None` without a sign change.
pub fn bisect_decreasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Option<f64> {
    if f(lo) <= 0.0 || f(hi) >= 0.0 {
        return None;
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if f(m) > 0.0 {
            lo = m;
        } else {
            hi = m;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Composite Simpson rule on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}
