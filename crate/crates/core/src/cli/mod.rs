//! Command-line front end: `fit`, `predict-cv`, `simulate` and `km-check`.

mod io;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

pub use io::{load_csv, parse_csv, write_design_csv, CovariateExpr, LoadedData, ModelSpec};

use crate::data::DesignData;
use crate::error::Error;
use crate::gehan::{bootstrap_se, fit_aft, AftFit, FitOptions};
use crate::simulation::{Engine, Scenario, Study};
use crate::survfit::{TruncationMode, DEFAULT_TAIL_THRESHOLD};

#[derive(Debug, Error, PartialEq)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("fit error: {0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::Fit(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(_) => Self::Config(e.to_string()),
            Error::InvalidData(_) | Error::LengthMismatch { .. } => Self::Data(e.to_string()),
            _ => Self::Fit(e.to_string()),
        }
    }
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Config(format!("cannot write {}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "aftmean", version, about = "Mean survival time under censored linear regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit slopes and intercept, with optional bootstrap standard errors.
    Fit(FitArgs),
    /// Leave-one-out predictions for every subject.
    PredictCv(CvArgs),
    /// Run a Monte Carlo scenario file.
    Simulate(SimulateArgs),
    /// Report the residual Kaplan–Meier tail and the adequacy verdict.
    KmCheck(DataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Maxobs,
    Theoretical,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Observed time column.
    #[arg(long)]
    pub response: String,
    /// Event indicator column (1 = failure, 0 = censored).
    #[arg(long)]
    pub event: String,
    /// Comma-separated covariates; `log(col)` takes the natural log.
    #[arg(long, value_delimiter = ',', required = true)]
    pub covariates: Vec<String>,
    /// Natural log of the response before fitting.
    #[arg(long)]
    pub log_time: bool,
    /// Divide the response by this before any log (e.g. 365.25 for days to years).
    #[arg(long, default_value_t = 1.0)]
    pub time_scale: f64,
    /// Treat this event-column code as failure and any other code as censored.
    #[arg(long)]
    pub event_value: Option<f64>,
    /// Skip rows with empty or NA cells in model columns.
    #[arg(long)]
    pub drop_missing: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Maxobs)]
    pub mode: ModeArg,
    /// Exponent of the theoretical truncation rule.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Tail diagnostic threshold.
    #[arg(long, default_value_t = DEFAULT_TAIL_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
    /// Bootstrap resamples (0 disables).
    #[arg(long, default_value_t = 0)]
    pub boot: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario file.
    #[arg(long)]
    pub config: PathBuf,
    /// Summary CSV path; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Formats with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    // exponent after rounding, so 0.00999999 counts as 1e-2
    let sci = format!("{x:.5e}");
    let mag: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    if !(-4..6).contains(&mag) {
        sci
    } else {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    }
}

impl DataArgs {
    fn spec(&self) -> Result<ModelSpec, CliError> {
        let covariates = self.covariates.iter().map(|c| CovariateExpr::parse(c)).collect::<Result<Vec<_>, _>>()?;
        let mut spec = ModelSpec::new(&self.response, &self.event, covariates);
        spec.log_time = self.log_time;
        spec.time_scale = self.time_scale;
        spec.event_value = self.event_value;
        spec.drop_missing = self.drop_missing;
        Ok(spec)
    }

    fn load(&self) -> Result<(ModelSpec, DesignData), CliError> {
        let spec = self.spec()?;
        let loaded = load_csv(&self.input, &spec)?;
        if loaded.dropped > 0 {
            eprintln!("skipped {} rows with missing model cells", loaded.dropped);
        }
        Ok((spec, loaded.data))
    }

    fn fit_options(&self) -> Result<FitOptions, CliError> {
        let mode = match (self.mode, self.epsilon) {
            (ModeArg::Theoretical, eps) => TruncationMode::theoretical(eps.unwrap_or(TruncationMode::DEFAULT_EPSILON))?,
            (ModeArg::Maxobs, Some(_)) => return Err(CliError::Config("--epsilon needs --mode theoretical".into())),
            (ModeArg::Maxobs, None) => TruncationMode::MaxObserved,
        };
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return Err(CliError::Config(format!("--threshold must lie in (0, 1], got {}", self.threshold)));
        }
        Ok(FitOptions { mode, tail_threshold: self.threshold, ..FitOptions::default() })
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::PredictCv(a) => cmd_predict_cv(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::KmCheck(a) => cmd_km_check(a),
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(write_err(path))
}

fn tail_line(fit: &AftFit) -> String {
    let t = &fit.tail;
    format!(
        "residual KM tail {} (threshold {}): {}",
        sig6(t.tail_value),
        sig6(t.threshold),
        if t.adequate { "adequate" } else { "inadequate" }
    )
}

pub fn cmd_fit(a: &FitArgs) -> Result<(), CliError> {
    let (spec, data) = a.data.load()?;
    let options = a.data.fit_options()?;
    let mut fit = fit_aft(&data, &options)?;
    if a.boot > 0 {
        fit.se = Some(bootstrap_se(&data, a.boot, a.seed, &options)?);
    }
    create_dir(&a.output)?;

    let labels: Vec<String> = std::iter::once("intercept".to_string()).chain(spec.covariates.iter().map(|c| c.label())).collect();
    let estimates: Vec<f64> = std::iter::once(fit.intercept).chain(fit.slopes.iter().copied()).collect();
    let path = a.output.join("fit_summary.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let csv_err = |e: csv::Error| CliError::Config(format!("cannot write {}: {e}", path.display()));
    w.write_record(["term", "estimate", "se"]).map_err(csv_err)?;
    for (k, (label, est)) in labels.iter().zip(&estimates).enumerate() {
        let se = fit.se.as_ref().map_or(String::new(), |s| s[k].to_string());
        w.write_record([label.clone(), est.to_string(), se]).map_err(csv_err)?;
    }
    w.flush().map_err(write_err(&path))?;

    let path = a.output.join("fit_diagnostics.csv");
    let mut w = create(&path)?;
    let rows = [
        ("n", data.n().to_string()),
        ("events", data.n_events().to_string()),
        ("tail_value", fit.tail.tail_value.to_string()),
        ("threshold", fit.tail.threshold.to_string()),
        ("adequate", fit.tail.adequate.to_string()),
        ("truncation_point", fit.residual_distribution.truncation_point().to_string()),
        ("loss", fit.report.loss.to_string()),
        ("score_norm", fit.report.score_norm.to_string()),
        ("iterations", fit.report.iterations.to_string()),
    ];
    let mut text = String::from("quantity,value\n");
    for (k, v) in rows {
        text.push_str(&format!("{k},{v}\n"));
    }
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(write_err(&path))?;

    let path = a.output.join("km_curve.csv");
    fit.residual_distribution.write_curve_csv(create(&path)?).map_err(write_err(&path))?;

    println!("n = {}, events = {}", data.n(), data.n_events());
    for (k, (label, est)) in labels.iter().zip(&estimates).enumerate() {
        match &fit.se {
            Some(se) => println!("{label:>16}  {:>12}  (se {})", sig6(*est), sig6(se[k])),
            None => println!("{label:>16}  {:>12}", sig6(*est)),
        }
    }
    println!("{}", tail_line(&fit));
    Ok(())
}

/// One held-out prediction; `predicted` is `None` when the fold's fit failed.
#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub observed: f64,
    pub event: bool,
    pub predicted: Option<f64>,
}

/// Fits without subject `i` and predicts it, for every `i`.
pub fn leave_one_out(data: &DesignData, options: &FitOptions) -> Result<Vec<CvRow>, CliError> {
    if data.n() < 3 {
        return Err(CliError::Data(format!("leave-one-out needs at least 3 subjects, got {}", data.n())));
    }
    Ok((0..data.n())
        .into_par_iter()
        .map(|i| CvRow {
            observed: data.y()[i],
            event: data.events()[i],
            predicted: fit_aft(&data.without(i), options).ok().map(|f| f.predict(data.row(i))),
        })
        .collect())
}

pub fn cmd_predict_cv(a: &CvArgs) -> Result<(), CliError> {
    let (_, data) = a.data.load()?;
    let rows = leave_one_out(&data, &a.data.fit_options()?)?;
    create_dir(&a.output)?;
    let path = a.output.join("loo_predictions.csv");
    let mut text = String::from("index,observed,event,predicted,fold_failed\n");
    for (i, r) in rows.iter().enumerate() {
        let p = r.predicted.map_or(String::new(), |v| v.to_string());
        text.push_str(&format!("{i},{},{},{p},{}\n", r.observed, u8::from(r.event), u8::from(r.predicted.is_none())));
    }
    let mut w = create(&path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(write_err(&path))?;

    let failed = rows.iter().filter(|r| r.predicted.is_none()).count();
    let sq: Vec<f64> = rows.iter().filter(|r| r.event).filter_map(|r| r.predicted.map(|p| (p - r.observed).powi(2))).collect();
    let censored: Vec<&CvRow> = rows.iter().filter(|r| !r.event && r.predicted.is_some()).collect();
    let above = censored.iter().filter(|r| r.predicted.unwrap() > r.observed).count();
    let mse = sq.iter().sum::<f64>() / sq.len().max(1) as f64;
    let share = above as f64 / censored.len().max(1) as f64;
    let path = a.output.join("loo_summary.csv");
    let mut w = create(&path)?;
    let text = format!(
        "quantity,value\nn,{}\nfolds_failed,{failed}\nmse_events,{mse}\ncensored_predicted_above_observed,{share}\n",
        rows.len()
    );
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(write_err(&path))?;
    println!("folds: {} ({failed} failed)", rows.len());
    println!("MSE over events: {}", sig6(mse));
    println!("censored subjects predicted above observed time: {}", sig6(share));
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let scenario = Scenario::from_file(&a.config)?;
    let engine = Engine { threads: a.threads };
    let table = match scenario.study {
        Study::Estimation => engine.run_estimation(&scenario)?,
        Study::Prediction => engine.run_prediction(&scenario)?,
    };
    match &a.output {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(dir)?;
            }
            let mut w = create(path)?;
            table.write_csv(&mut w).and_then(|_| w.flush()).map_err(write_err(path))?;
        }
        None => table.write_csv(std::io::stdout().lock()).map_err(|e| CliError::Config(e.to_string()))?,
    }
    eprintln!(
        "{}: {} replicates, {} failed, censoring rate {}",
        table.scenario,
        table.replicates,
        table.failures,
        sig6(table.censoring_rate)
    );
    for r in &table.rows {
        let sd = r.sd.map_or("-".to_string(), sig6);
        match r.ratio {
            Some(q) => eprintln!("{:>8}  mean {}  sd {sd}  ratio {}", r.name, sig6(r.mean), sig6(q)),
            None => eprintln!("{:>8}  mean {}  sd {sd}", r.name, sig6(r.mean)),
        }
    }
    Ok(())
}

pub fn cmd_km_check(a: &DataArgs) -> Result<(), CliError> {
    let (_, data) = a.load()?;
    let fit = fit_aft(&data, &a.fit_options()?)?;
    println!("{}", tail_line(&fit));
    Ok(())
}
