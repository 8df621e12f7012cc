use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::CliError;
use crate::data::DesignData;

/// A model column: a raw CSV column or its natural log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CovariateExpr {
    Column(String),
    Log(String),
}

impl CovariateExpr {
    /// Parses `name` or `log(name)`.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let t = text.trim();
        if t.is_empty() {
            return Err(CliError::Config("empty covariate name".into()));
        }
        match t.strip_prefix("log(").and_then(|r| r.strip_suffix(')')) {
            Some(inner) if !inner.trim().is_empty() => Ok(Self::Log(inner.trim().to_string())),
            Some(_) => Err(CliError::Config(format!("bad covariate expression '{t}'"))),
            None => Ok(Self::Column(t.to_string())),
        }
    }

    pub fn column(&self) -> &str {
        match self {
            Self::Column(c) | Self::Log(c) => c,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Column(c) => c.clone(),
            Self::Log(c) => format!("log({c})"),
        }
    }
}

/// Which columns make up the model and how the response is transformed.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub response: String,
    pub event: String,
    pub covariates: Vec<CovariateExpr>,
    /// Natural log of the response (after `time_scale`).
    pub log_time: bool,
    /// The response is divided by this before any log.
    pub time_scale: f64,
    /// When set, `event = (cell == value)` for any numeric code; otherwise cells must be 0 or 1.
    pub event_value: Option<f64>,
    /// Skip rows with an empty or `NA` cell in a model column.
    pub drop_missing: bool,
}

impl ModelSpec {
    pub fn new(response: &str, event: &str, covariates: Vec<CovariateExpr>) -> Self {
        Self {
            response: response.into(),
            event: event.into(),
            covariates,
            log_time: false,
            time_scale: 1.0,
            event_value: None,
            drop_missing: false,
        }
    }
}

/// Rows read from a CSV file; `dropped` counts rows skipped for missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub data: DesignData,
    pub dropped: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("nan")
}

/// Reads a headed CSV file into a design for `spec`.
pub fn load_csv(path: &Path, spec: &ModelSpec) -> Result<LoadedData, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    parse_csv(&text, spec)
}

pub fn parse_csv(text: &str, spec: &ModelSpec) -> Result<LoadedData, CliError> {
    if !(spec.time_scale.is_finite() && spec.time_scale > 0.0) {
        return Err(CliError::Config(format!("time scale must be positive, got {}", spec.time_scale)));
    }
    if spec.covariates.is_empty() {
        return Err(CliError::Config("at least one covariate is required".into()));
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| CliError::Data(format!("bad header: {e}")))?.clone();
    if headers.is_empty() || text.trim().is_empty() {
        return Err(CliError::Data("empty file".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Config(format!("column '{name}' not found in header")))
    };
    let y_col = find(&spec.response)?;
    let ev_col = find(&spec.event)?;
    let x_cols = spec.covariates.iter().map(|c| find(c.column())).collect::<Result<Vec<_>, _>>()?;

    let mut y = Vec::new();
    let mut event = Vec::new();
    let mut x = Vec::new();
    let mut dropped = 0;
    for (k, record) in reader.records().enumerate() {
        // row numbers count the header as line 1
        let line = k + 2;
        let record = record.map_err(|e| CliError::Data(format!("row {line}: {e}")))?;
        let cell = |col: usize| record.get(col).unwrap_or("");
        let name = |col: usize| headers.get(col).unwrap_or("?").to_string();
        let used = std::iter::once(y_col).chain(std::iter::once(ev_col)).chain(x_cols.iter().copied());
        if spec.drop_missing && used.clone().any(|c| is_missing(cell(c))) {
            dropped += 1;
            continue;
        }
        let number = |col: usize| -> Result<f64, CliError> {
            let raw = cell(col).trim();
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Data(format!("row {line}, column '{}': '{raw}' is not a finite number", name(col))))
        };
        let log_of = |v: f64, col: usize| -> Result<f64, CliError> {
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(CliError::Data(format!("row {line}, column '{}': cannot take log of {v}", name(col))))
            }
        };

        let mut t = number(y_col)? / spec.time_scale;
        if spec.log_time {
            t = log_of(t, y_col)?;
        }
        let code = number(ev_col)?;
        let flag = match spec.event_value {
            Some(v) => code == v,
            None if code == 0.0 => false,
            None if code == 1.0 => true,
            None => {
                return Err(CliError::Data(format!(
                    "row {line}, column '{}': event indicator must be 0 or 1, got {code}",
                    name(ev_col)
                )))
            }
        };
        for (expr, &col) in spec.covariates.iter().zip(&x_cols) {
            let v = number(col)?;
            x.push(match expr {
                CovariateExpr::Column(_) => v,
                CovariateExpr::Log(_) => log_of(v, col)?,
            });
        }
        y.push(t);
        event.push(flag);
    }
    if y.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    let data = DesignData::from_flat(y, event, x, spec.covariates.len()).map_err(CliError::from)?;
    Ok(LoadedData { data, dropped })
}

/// Writes `data` with the given column names; reading it back with the same names is the identity.
pub fn write_design_csv<W: std::io::Write>(out: W, data: &DesignData, response: &str, event: &str, covariates: &[String]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![response.to_string(), event.to_string()];
    header.extend(covariates.iter().cloned());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut row = vec![data.y()[i].to_string(), u8::from(data.events()[i]).to_string()];
        row.extend(data.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()
}
