use std::path::Path;

use serde::Deserialize;

use crate::distributions::{CensoringLaw, CovariateLaw, ErrorLaw, SubjectLaws, EULER_GAMMA};
use crate::error::{Error, Result};
use crate::survfit::TruncationMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Intercept and slope recovery for `T = 2 + X1 + X2 + error`.
    Estimation,
    /// Linear vs Cox prediction for `T = X + e0`, `e0` min-extreme-value.
    Prediction,
}

/// Support of the continuous covariate in the estimation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecondCovariate {
    /// `N(0, 1)`
    Normal,
    /// `U(-2, 2)`
    Wide,
    /// `U(-0.5, 0)`
    Narrow,
}

/// Covariate law in the prediction study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionCovariate {
    /// `N(0, 1)`
    Normal,
    /// `U(-2, 2)`
    Wide,
    /// `U(-1, 1)`
    Narrow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub study: Study,
    pub laws: SubjectLaws,
    pub n: usize,
    pub replicates: usize,
    pub seed: u64,
    pub mode: TruncationMode,
}

impl Scenario {
    /// One cell of the estimation study: error law `a`..`e`, censoring `U(0, 5) ^ tau`.
    pub fn table1(error: char, x2: SecondCovariate, tau: f64, n: usize, replicates: usize, seed: u64) -> Result<Self> {
        let second = match x2 {
            SecondCovariate::Normal => CovariateLaw::normal(0.0, 1.0)?,
            SecondCovariate::Wide => CovariateLaw::uniform(-2.0, 2.0)?,
            SecondCovariate::Narrow => CovariateLaw::uniform(-0.5, 0.0)?,
        };
        let s = Self {
            name: format!("table1_{error}_{x2:?}_tau{tau}_n{n}").to_lowercase(),
            study: Study::Estimation,
            laws: SubjectLaws {
                intercept: 2.0,
                slopes: vec![1.0, 1.0],
                covariates: vec![CovariateLaw::bernoulli(0.5)?, second],
                error: ErrorLaw::table1(error)?,
                censoring: CensoringLaw::uniform(0.0, 5.0, tau)?,
            },
            n,
            replicates,
            seed,
            mode: TruncationMode::MaxObserved,
        };
        s.validate()?;
        Ok(s)
    }

    /// One cell of the prediction study: censoring `U(-3, 3) ^ tau` for `tau < 3`, none otherwise.
    pub fn table2(x: PredictionCovariate, tau: Option<f64>, n: usize, replicates: usize, seed: u64) -> Result<Self> {
        let law = match x {
            PredictionCovariate::Normal => CovariateLaw::normal(0.0, 1.0)?,
            PredictionCovariate::Wide => CovariateLaw::uniform(-2.0, 2.0)?,
            PredictionCovariate::Narrow => CovariateLaw::uniform(-1.0, 1.0)?,
        };
        // tau >= 3 means unlimited follow-up: every failure is observed
        let censoring = match tau {
            Some(t) if t < 3.0 => CensoringLaw::uniform(-3.0, 3.0, t)?,
            _ => CensoringLaw::none(),
        };
        let tau_label = tau.filter(|t| *t < 3.0).map_or("inf".to_string(), |t| t.to_string());
        let s = Self {
            name: format!("table2_{x:?}_tau{tau_label}_n{n}").to_lowercase(),
            study: Study::Prediction,
            laws: SubjectLaws { intercept: 0.0, slopes: vec![1.0], covariates: vec![law], error: ErrorLaw::ExtremeValueMin, censoring },
            n,
            replicates,
            seed,
            mode: TruncationMode::MaxObserved,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.laws.validate()?;
        if self.replicates < 1 {
            return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!("sample size must be at least 2, got {}", self.n)));
        }
        match self.study {
            Study::Estimation => {
                if self.laws.intercept != 2.0 || self.laws.slopes != [1.0, 1.0] {
                    return Err(Error::InvalidParameter("estimation scenarios use T = 2 + X1 + X2 + error".into()));
                }
            }
            Study::Prediction => {
                if self.laws.intercept != 0.0 || self.laws.slopes != [1.0] || self.laws.error != ErrorLaw::ExtremeValueMin {
                    return Err(Error::InvalidParameter("prediction scenarios use T = X + e0 with min-extreme-value e0".into()));
                }
            }
        }
        Ok(())
    }

    /// `(intercept, slopes...)` of the mean regression, the target of the linear fit.
    pub fn true_coefficients(&self) -> Vec<f64> {
        let mut v = vec![self.laws.intercept + self.laws.error.mean()];
        v.extend(&self.laws.slopes);
        v
    }

    /// Same design without censoring, the reference for prediction ratios.
    pub fn uncensored(&self) -> Self {
        let mut s = self.clone();
        s.laws.censoring = CensoringLaw::none();
        s.name = format!("{}_uncensored", self.name);
        s
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::InvalidParameter(format!("scenario file: {e}")))?;
        cfg.into_scenario()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidParameter(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ModeSpec {
    Maxobs,
    Theoretical,
}

/// Flat scenario file: one table cell per file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    name: Option<String>,
    study: Option<Study>,
    /// Estimation error law, `a` to `e`.
    error_law: Option<String>,
    /// Estimation covariate `X2`: `normal`, `wide` or `narrow`.
    x2_law: Option<String>,
    /// Prediction covariate: `normal`, `wide` or `narrow`.
    x_law: Option<String>,
    /// Follow-up cap; absent means no censoring.
    tau: Option<f64>,
    n: usize,
    reps: usize,
    seed: u64,
    mode: Option<ModeSpec>,
    epsilon: Option<f64>,
}

fn second_covariate(name: &str) -> Result<SecondCovariate> {
    match name.to_ascii_lowercase().replace(' ', "").as_str() {
        "normal" | "n(0,1)" => Ok(SecondCovariate::Normal),
        "wide" | "u(-2,2)" => Ok(SecondCovariate::Wide),
        "narrow" | "u(-0.5,0)" => Ok(SecondCovariate::Narrow),
        other => Err(Error::InvalidParameter(format!("unknown x2_law '{other}'"))),
    }
}

fn prediction_covariate(name: &str) -> Result<PredictionCovariate> {
    match name.to_ascii_lowercase().replace(' ', "").as_str() {
        "normal" | "n(0,1)" => Ok(PredictionCovariate::Normal),
        "wide" | "u(-2,2)" => Ok(PredictionCovariate::Wide),
        "narrow" | "u(-1,1)" => Ok(PredictionCovariate::Narrow),
        other => Err(Error::InvalidParameter(format!("unknown x_law '{other}'"))),
    }
}

impl ScenarioConfig {
    fn into_scenario(self) -> Result<Scenario> {
        let study = match (self.study, &self.error_law, &self.x_law) {
            (Some(s), _, _) => s,
            (None, Some(_), None) => Study::Estimation,
            (None, None, Some(_)) => Study::Prediction,
            _ => return Err(Error::InvalidParameter("cannot tell the study apart: set `study`".into())),
        };
        let mut s = match study {
            Study::Estimation => {
                if self.x_law.is_some() {
                    return Err(Error::InvalidParameter("x_law belongs to prediction scenarios".into()));
                }
                let label = self.error_law.as_deref().ok_or_else(|| Error::InvalidParameter("missing error_law".into()))?;
                let mut chars = label.chars();
                let (Some(c), None) = (chars.next(), chars.next()) else {
                    return Err(Error::InvalidParameter(format!("error_law must be one letter a-e, got '{label}'")));
                };
                let x2 = second_covariate(self.x2_law.as_deref().unwrap_or("normal"))?;
                let mut s = Scenario::table1(c, x2, self.tau.unwrap_or(f64::INFINITY), self.n, self.reps, self.seed)?;
                if self.tau.is_none() {
                    s.laws.censoring = CensoringLaw::none();
                }
                s
            }
            Study::Prediction => {
                if self.error_law.is_some() || self.x2_law.is_some() {
                    return Err(Error::InvalidParameter("error_law and x2_law belong to estimation scenarios".into()));
                }
                let x = prediction_covariate(self.x_law.as_deref().unwrap_or("normal"))?;
                Scenario::table2(x, self.tau, self.n, self.reps, self.seed)?
            }
        };
        s.mode = match (self.mode, self.epsilon) {
            (Some(ModeSpec::Theoretical), eps) => TruncationMode::theoretical(eps.unwrap_or(TruncationMode::DEFAULT_EPSILON))?,
            (_, Some(_)) => return Err(Error::InvalidParameter("epsilon is only meaningful with mode = \"theoretical\"".into())),
            _ => TruncationMode::MaxObserved,
        };
        if let Some(name) = self.name {
            s.name = name;
        }
        Ok(s)
    }
}

/// Mean of the min-extreme-value error, the intercept of the prediction model's mean regression.
pub const PREDICTION_INTERCEPT: f64 = -EULER_GAMMA;
