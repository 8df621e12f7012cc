//! Error, covariate and censoring laws for the simulation designs, plus seeded streams.
//!
//! Continuous laws without a closed-form sampler in `rand_distr` use inverse-CDF
//! transforms of an open-interval uniform draw, so every variant consumes a
//! fixed number of stream words per sample.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::data::ObservedRecord;
use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorLaw {
    Normal { sd: f64 },
    /// Max-Gumbel with CDF `exp(-exp(-(x - location) / scale))`.
    GumbelMax { location: f64, scale: f64 },
    Laplace { scale: f64 },
    Logistic { scale: f64 },
    StudentT { df: f64 },
    /// Min-extreme-value law with CDF `1 - exp(-exp(t))`; mean `-EULER_GAMMA`.
    ExtremeValueMin,
    /// Point mass at zero (noiseless model).
    Zero,
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

impl ErrorLaw {
    pub fn normal(sd: f64) -> Result<Self> {
        Ok(Self::Normal { sd: positive("normal sd", sd)? })
    }

    pub fn gumbel_max(location: f64, scale: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::InvalidParameter("gumbel location must be finite".into()));
        }
        Ok(Self::GumbelMax { location, scale: positive("gumbel scale", scale)? })
    }

    /// Max-Gumbel shifted to mean zero: location `-scale * EULER_GAMMA`.
    pub fn centered_gumbel(scale: f64) -> Result<Self> {
        let scale = positive("gumbel scale", scale)?;
        Self::gumbel_max(-scale * EULER_GAMMA, scale)
    }

    pub fn laplace(scale: f64) -> Result<Self> {
        Ok(Self::Laplace { scale: positive("laplace scale", scale)? })
    }

    pub fn logistic(scale: f64) -> Result<Self> {
        Ok(Self::Logistic { scale: positive("logistic scale", scale)? })
    }

    pub fn student_t(df: f64) -> Result<Self> {
        Ok(Self::StudentT { df: positive("student-t df", df)? })
    }

    /// The five error laws of the intercept study, labelled `a` through `e`.
    pub fn table1(label: char) -> Result<Self> {
        match label.to_ascii_lowercase() {
            'a' => Self::normal(0.5),
            'b' => Self::centered_gumbel(0.5),
            'c' => Self::laplace(0.5),
            'd' => Self::logistic(0.5),
            'e' => Self::student_t(30.0),
            other => Err(Error::InvalidParameter(format!("unknown error law label '{other}'"))),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::GumbelMax { location, scale } => location + scale * EULER_GAMMA,
            Self::StudentT { df } if df <= 1.0 => f64::NAN,
            Self::ExtremeValueMin => -EULER_GAMMA,
            _ => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Self::Normal { sd } => sd * sd,
            Self::GumbelMax { scale, .. } => scale * scale * PI * PI / 6.0,
            Self::Laplace { scale } => 2.0 * scale * scale,
            Self::Logistic { scale } => scale * scale * PI * PI / 3.0,
            Self::StudentT { df } if df > 2.0 => df / (df - 2.0),
            Self::StudentT { .. } => f64::INFINITY,
            Self::ExtremeValueMin => PI * PI / 6.0,
            Self::Zero => 0.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Normal { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            Self::GumbelMax { location, scale } => {
                let u: f64 = rng.sample(Open01);
                location - scale * (-u.ln()).ln()
            }
            Self::Laplace { scale } => {
                let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
                -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Self::Logistic { scale } => {
                let u: f64 = rng.sample(Open01);
                scale * (u / (1.0 - u)).ln()
            }
            Self::StudentT { df } => StudentT::new(df)
                .expect("df validated at construction")
                .sample(rng),
            Self::ExtremeValueMin => {
                let u: f64 = rng.sample(Open01);
                (-(1.0 - u).ln()).ln()
            }
            Self::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CovariateLaw {
    Bernoulli { p: f64 },
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
    /// Degenerate covariate fixed at a value.
    Point(f64),
}

impl CovariateLaw {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Self::Bernoulli { p })
        } else {
            Err(Error::InvalidParameter(format!("bernoulli p must lie in (0, 1), got {p}")))
        }
    }

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidParameter("normal mean must be finite".into()));
        }
        Ok(Self::Normal { mean, sd: positive("normal sd", sd)? })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if low.is_finite() && high.is_finite() && low < high {
            Ok(Self::Uniform { low, high })
        } else {
            Err(Error::InvalidParameter(format!("uniform requires finite low < high, got ({low}, {high})")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Bernoulli { p } => {
                let u: f64 = rng.random();
                if u < p { 1.0 } else { 0.0 }
            }
            Self::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Self::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Self::Point(v) => v,
        }
    }
}

/// `min(Uniform(low, high), tau)`, or no censoring at all when `base` is `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CensoringLaw {
    base: Option<(f64, f64)>,
    tau: f64,
}

impl CensoringLaw {
    pub fn uniform(low: f64, high: f64, tau: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(Error::InvalidParameter(format!(
                "censoring base requires finite low < high, got ({low}, {high})"
            )));
        }
        if tau.is_nan() {
            return Err(Error::InvalidParameter("censoring tau is NaN".into()));
        }
        Ok(Self { base: Some((low, high)), tau })
    }

    /// Every failure time observed (`C = +inf`).
    pub fn none() -> Self {
        Self { base: None, tau: f64::INFINITY }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn base(&self) -> Option<(f64, f64)> {
        self.base
    }

    pub fn is_uncensored(&self) -> bool {
        self.base.is_none()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.base {
            Some((low, high)) => (low + (high - low) * rng.random::<f64>()).min(self.tau),
            None => f64::INFINITY,
        }
    }
}

/// `(master seed, stream index)` naming one reproducible random stream.
///
/// Streams are ChaCha8 nonces under a key derived from the master seed, so
/// distinct indices never overlap and can be handed to different workers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedSpec {
    pub seed: u64,
    pub stream: u64,
}

impl SeedSpec {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// A fresh master seed for a nested family of streams (e.g. bootstrap inside a replicate).
    pub fn derive_seed(&self) -> u64 {
        self.rng().next_u64()
    }
}

/// Data-generating laws for `T = intercept + x' slopes + error`, observed as `(min(T, C), 1(T <= C), x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectLaws {
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub covariates: Vec<CovariateLaw>,
    pub error: ErrorLaw,
    pub censoring: CensoringLaw,
}

/// A simulated subject together with its latent failure and censoring times.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSubject {
    pub record: ObservedRecord,
    pub failure_time: f64,
    pub censoring_time: f64,
}

impl SubjectLaws {
    pub fn validate(&self) -> Result<()> {
        if self.slopes.len() != self.covariates.len() || self.slopes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "{} slopes for {} covariate laws",
                self.slopes.len(),
                self.covariates.len()
            )));
        }
        Ok(())
    }

    /// Deterministic plug-in: observation for given covariates, error draw and censoring time.
    pub fn observe(&self, x: Vec<f64>, error: f64, censoring_time: f64) -> SimulatedSubject {
        let t = self.intercept + x.iter().zip(&self.slopes).map(|(a, b)| a * b).sum::<f64>() + error;
        SimulatedSubject {
            record: ObservedRecord { y: t.min(censoring_time), event: t <= censoring_time, x },
            failure_time: t,
            censoring_time,
        }
    }

    /// Draws covariates, then the error, then the censoring time.
    pub fn sample_subject<R: Rng + ?Sized>(&self, rng: &mut R) -> SimulatedSubject {
        let x: Vec<f64> = self.covariates.iter().map(|law| law.sample(rng)).collect();
        let e = self.error.sample(rng);
        let c = self.censoring.sample(rng);
        self.observe(x, e, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(law: ErrorLaw, n: usize, stream: u64) -> (f64, f64) {
        let mut rng = SeedSpec::new(20240917, stream).rng();
        let draws: Vec<f64> = (0..n).map(|_| law.sample(&mut rng)).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        (m, v)
    }

    #[test]
    fn constructors_reject_bad_parameters() {
        assert!(ErrorLaw::normal(0.0).is_err());
        assert!(ErrorLaw::laplace(-1.0).is_err());
        assert!(ErrorLaw::logistic(0.0).is_err());
        assert!(ErrorLaw::student_t(0.0).is_err());
        assert!(ErrorLaw::gumbel_max(0.0, 0.0).is_err());
        assert!(CovariateLaw::uniform(1.0, 1.0).is_err());
        assert!(CovariateLaw::bernoulli(1.0).is_err());
        assert!(CovariateLaw::bernoulli(0.0).is_err());
        assert!(CensoringLaw::uniform(0.0, 5.0, f64::NAN).is_err());
    }

    #[test]
    fn analytic_means() {
        assert_eq!(ErrorLaw::normal(0.5).unwrap().mean(), 0.0);
        assert_eq!(ErrorLaw::student_t(30.0).unwrap().mean(), 0.0);
        assert!((ErrorLaw::ExtremeValueMin.mean() + 0.577_215_664_9).abs() < 1e-10);
        assert!(ErrorLaw::centered_gumbel(0.5).unwrap().mean().abs() < 1e-15);
    }

    #[test]
    fn centered_gumbel_empirical_mean() {
        let (m, _) = moments(ErrorLaw::centered_gumbel(0.5).unwrap(), 1_000_000, 1);
        assert!(m.abs() < 0.002, "mean {m}");
    }

    #[test]
    fn laplace_empirical_variance() {
        let (_, v) = moments(ErrorLaw::laplace(0.5).unwrap(), 1_000_000, 2);
        assert!((v - 0.5).abs() < 0.01, "variance {v}");
    }

    #[test]
    fn extreme_value_min_empirical_mean() {
        let (m, v) = moments(ErrorLaw::ExtremeValueMin, 1_000_000, 3);
        assert!((m + 0.5772).abs() < 0.005, "mean {m}");
        assert!((v - ErrorLaw::ExtremeValueMin.variance()).abs() < 0.02);
    }

    #[test]
    fn zero_mean_laws_within_five_standard_errors() {
        for (s, law) in ['a', 'b', 'c', 'd', 'e'].into_iter().enumerate() {
            let law = ErrorLaw::table1(law).unwrap();
            let (m, _) = moments(law, 1_000_000, 10 + s as u64);
            assert!(m.abs() < 5.0 * law.variance().sqrt() / 1000.0, "{law:?}: {m}");
        }
    }

    #[test]
    fn streams_reproduce_and_decorrelate() {
        let a: Vec<f64> = {
            let mut r = SeedSpec::new(7, 0).rng();
            (0..100_000).map(|_| r.random()).collect()
        };
        let a2: Vec<f64> = {
            let mut r = SeedSpec::new(7, 0).rng();
            (0..100_000).map(|_| r.random()).collect()
        };
        let b: Vec<f64> = {
            let mut r = SeedSpec::new(7, 1).rng();
            (0..100_000).map(|_| r.random()).collect()
        };
        assert_eq!(a, a2);
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        assert!((cov / (va * vb).sqrt()).abs() < 0.01);
    }

    #[test]
    fn censoring_never_exceeds_tau() {
        let law = CensoringLaw::uniform(0.0, 5.0, 1.5).unwrap();
        let mut rng = SeedSpec::new(3, 0).rng();
        assert!((0..10_000).all(|_| law.sample(&mut rng) <= 1.5));
        assert_eq!(CensoringLaw::none().sample(&mut rng), f64::INFINITY);
    }

    #[test]
    fn noiseless_subject_is_plug_in() {
        let laws = SubjectLaws {
            intercept: 2.0,
            slopes: vec![1.0, 1.0],
            covariates: vec![CovariateLaw::Point(1.0), CovariateLaw::Point(0.0)],
            error: ErrorLaw::Zero,
            censoring: CensoringLaw::none(),
        };
        let s = laws.sample_subject(&mut SeedSpec::new(0, 0).rng());
        assert_eq!(s.record.y, 3.0);
        assert!(s.record.event);
    }

    #[test]
    fn truncation_below_every_failure_censors_all() {
        let laws = SubjectLaws {
            intercept: 2.0,
            slopes: vec![1.0, 1.0],
            covariates: vec![CovariateLaw::bernoulli(0.5).unwrap(), CovariateLaw::normal(0.0, 1.0).unwrap()],
            error: ErrorLaw::normal(0.5).unwrap(),
            censoring: CensoringLaw::uniform(0.0, 5.0, -1e9).unwrap(),
        };
        let mut rng = SeedSpec::new(5, 0).rng();
        assert!((0..1000).all(|_| !laws.sample_subject(&mut rng).record.event));
    }

    #[test]
    fn table1_scenario_a_censoring_rate() {
        let laws = SubjectLaws {
            intercept: 2.0,
            slopes: vec![1.0, 1.0],
            covariates: vec![CovariateLaw::bernoulli(0.5).unwrap(), CovariateLaw::normal(0.0, 1.0).unwrap()],
            error: ErrorLaw::table1('a').unwrap(),
            censoring: CensoringLaw::uniform(0.0, 5.0, 1.5).unwrap(),
        };
        let mut rng = SeedSpec::new(11, 0).rng();
        let n = 100_000;
        let censored = (0..n).filter(|_| !laws.sample_subject(&mut rng).record.event).count();
        let rate = censored as f64 / n as f64;
        assert!((rate - 0.83).abs() < 0.01, "rate {rate}");
    }
}
