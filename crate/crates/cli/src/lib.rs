//! Command-line front end: CSV ingestion, fitting reports, residual tables,
//! half-normal envelopes and simulation studies.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use betadiag::envelope::{half_normal_envelope, residual_vs_predictor, EnvelopeData, EnvelopeOptions, PredictorTable};
use betadiag::fit::{coef_report, fit_mle, pseudo_r2, CoefReport, Dataset, FitOptions, FittedModel};
use betadiag::par::{with_threads, Execution};
use betadiag::residuals::{compute_many, ResidualKind};
use betadiag::simstudy::{builtin_scenario, run_study, CellStats, CovariateRule, ScenarioId, StudyOptions, StudySummary};
use betadiag::{Error, Link};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 314_159;

#[derive(Debug, Parser)]
#[command(name = "betadiag", version, about = "Beta regression fitting and residual diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Input CSV with a header row (fit, residuals, envelope)
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Output file (fit, residuals; stdout if omitted) or directory (envelope, simulate)
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Name of the response column
    #[arg(long, global = true, default_value = "y")]
    pub response: String,

    /// Link function: logit or cloglog
    #[arg(long, global = true, default_value = "logit")]
    pub link: String,

    /// Comma-separated residual kinds: swr1, swr2, quantile
    #[arg(long, global = true, default_value = "swr1,swr2,quantile")]
    pub kinds: String,

    /// Built-in scenario for simulate: I, II, III, IV or V
    #[arg(long, global = true, default_value = "I")]
    pub scenario: String,

    /// Precision parameter for simulate
    #[arg(long, global = true, default_value_t = 10.0)]
    pub phi: f64,

    /// Sample size for simulate
    #[arg(long, global = true, default_value_t = 16)]
    pub n: usize,

    /// Monte Carlo replications for simulate
    #[arg(long, global = true, default_value_t = 5000)]
    pub reps: usize,

    /// Envelope simulations
    #[arg(long, global = true, default_value_t = 100)]
    pub sims: usize,

    /// Master seed (default 314159)
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Worker threads; results do not depend on this
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output format
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fit a beta regression and report coefficients
    Fit,
    /// Fit and write the three residual kinds per observation
    Residuals,
    /// Fit and write half-normal envelope and residual-vs-predictor data
    Envelope,
    /// Run a Monte Carlo study for a built-in scenario
    Simulate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Validated command configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub response: String,
    pub link: Link,
    pub kinds: Vec<ResidualKind>,
    pub scenario: ScenarioId,
    pub phi: f64,
    pub n: usize,
    pub reps: usize,
    pub sims: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    pub format: Format,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self, CliError> {
        let kinds = cli
            .kinds
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<betadiag::Result<Vec<ResidualKind>>>()?;
        if kinds.is_empty() {
            return Err(CliError::input("--kinds is empty"));
        }
        let cfg = Self {
            command: cli.command,
            input: cli.input,
            output: cli.output,
            response: cli.response,
            link: cli.link.parse()?,
            kinds,
            scenario: cli.scenario.parse()?,
            phi: cli.phi,
            n: cli.n,
            reps: cli.reps,
            sims: cli.sims,
            seed: cli.seed,
            threads: cli.threads,
            format: cli.format,
        };
        match cfg.command {
            Command::Fit | Command::Residuals | Command::Envelope if cfg.input.is_none() => {
                Err(CliError::input("--input is required for this command"))
            }
            Command::Envelope | Command::Simulate if cfg.output.is_none() => {
                Err(CliError::input("--output directory is required for this command"))
            }
            _ => Ok(cfg),
        }
    }
}

/// Failure carrying the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            kind: "input",
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }

    /// Single-line JSON description for the diagnostic stream.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind, "code": self.code, "message": self.message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Input(_) => (1, "input"),
            Error::Domain(_) => (1, "domain"),
            Error::Convergence(_) => (2, "convergence"),
            Error::Study(_) => (2, "study"),
            Error::Numerical(_) => (3, "numerical"),
            Error::UndefinedStatistic(_) => (3, "undefined_statistic"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

/// Parses CSV text with a header row. The response column must be named
/// `response`; every other column becomes a covariate, and an intercept
/// is added in front.
pub fn parse_dataset(text: &str, response: &str) -> Result<Dataset, CliError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::input("missing header row"));
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(CliError::input("missing header row (first row is numeric)"));
    }
    let ycol = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| CliError::input(format!("response column '{response}' not found")))?;
    let mut y = Vec::new();
    let mut covs: Vec<(String, Vec<f64>)> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != ycol)
        .map(|(_, h)| (h.clone(), Vec::new()))
        .collect();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| CliError::input(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::input(format!("row {row}: expected {} fields, found {}", headers.len(), record.len())));
        }
        let mut c = 0;
        for (j, cell) in record.iter().enumerate() {
            let v = cell
                .trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::input(format!("row {row}, column '{}': '{cell}' is not a number", headers[j])))?;
            if j == ycol {
                if !(v > 0.0 && v < 1.0) {
                    return Err(CliError::input(format!("row {row}: response {v} is outside (0,1)")));
                }
                y.push(v);
            } else {
                covs[c].1.push(v);
                c += 1;
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::input("no data rows"));
    }
    Ok(Dataset::with_intercept(y, &covs)?)
}

/// 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "NA".into())
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let path = cfg.input.as_ref().expect("checked in RunConfig");
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_dataset(&text, &cfg.response)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn emit(cfg: &RunConfig, stdout: &mut dyn Write, contents: &str) -> Result<(), CliError> {
    match &cfg.output {
        Some(path) => write_file(path, contents),
        None => stdout
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::input(format!("stdout: {e}"))),
    }
}

fn output_dir(cfg: &RunConfig) -> Result<&Path, CliError> {
    let dir = cfg.output.as_deref().expect("checked in RunConfig");
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    Ok(dir)
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn fit_dataset(cfg: &RunConfig, d: &Dataset) -> Result<FittedModel, CliError> {
    Ok(fit_mle(d, cfg.link, &FitOptions::default())?)
}

fn convergence_code(m: &FittedModel) -> i32 {
    if m.converged() {
        0
    } else {
        2
    }
}

#[derive(Serialize)]
struct FitJson<'a> {
    link: Link,
    coefficients: &'a CoefReport,
    loglik: f64,
    pseudo_r2: Option<f64>,
    iterations: usize,
    converged: bool,
    gradient_norm: f64,
}

/// Coefficient table with estimate, standard error and exp(estimate),
/// followed by precision and fit-quality rows.
pub fn fit_report(cfg: &RunConfig, d: &Dataset, m: &FittedModel) -> Result<String, CliError> {
    let rep = coef_report(m, d)?;
    let r2 = match pseudo_r2(m, d) {
        Ok(v) => Some(v),
        Err(Error::UndefinedStatistic(_)) => None,
        Err(e) => return Err(e.into()),
    };
    if cfg.format == Format::Json {
        return Ok(to_json(&FitJson {
            link: m.link,
            coefficients: &rep,
            loglik: m.loglik,
            pseudo_r2: r2,
            iterations: m.convergence.iterations,
            converged: m.converged(),
            gradient_norm: m.convergence.gradient_norm,
        }));
    }
    let mut s = String::from("term,estimate,std_error,exp_estimate\n");
    for row in &rep.rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            csv_field(&row.term),
            fmt_f64(row.estimate),
            fmt_opt(row.std_error),
            fmt_f64(row.exp_estimate)
        );
    }
    let _ = writeln!(s, "phi,{},{},NA", fmt_f64(rep.phi), fmt_opt(rep.phi_std_error));
    let _ = writeln!(s, "loglik,{},NA,NA", fmt_f64(m.loglik));
    let _ = writeln!(s, "pseudo_r2,{},NA,NA", fmt_opt(r2));
    let _ = writeln!(s, "iterations,{},NA,NA", m.convergence.iterations);
    let _ = writeln!(s, "converged,{},NA,NA", m.converged());
    let _ = writeln!(s, "gradient_norm,{},NA,NA", fmt_f64(m.convergence.gradient_norm));
    Ok(s)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cmd_fit(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let d = load_dataset(cfg)?;
    let m = fit_dataset(cfg, &d)?;
    emit(cfg, stdout, &fit_report(cfg, &d, &m)?)?;
    Ok(convergence_code(&m))
}

#[derive(Serialize)]
struct ResidualRowJson {
    i: usize,
    y: f64,
    mu: f64,
    eta: f64,
    residuals: Vec<(ResidualKind, f64)>,
}

/// One row per observation: index, response, fitted mean, linear predictor
/// and the requested residual kinds.
pub fn residual_table(cfg: &RunConfig, d: &Dataset, m: &FittedModel) -> Result<String, CliError> {
    let sets = compute_many(m, d, &cfg.kinds)?;
    if cfg.format == Format::Json {
        let rows: Vec<ResidualRowJson> = (0..d.n())
            .map(|i| ResidualRowJson {
                i: i + 1,
                y: d.y()[i],
                mu: m.mu[i],
                eta: m.eta[i],
                residuals: sets.iter().map(|s| (s.kind, s.values[i])).collect(),
            })
            .collect();
        return Ok(to_json(&rows));
    }
    let mut s = String::from("i,y,mu,eta");
    for set in &sets {
        let _ = write!(s, ",{}", set.kind);
    }
    s.push('\n');
    for i in 0..d.n() {
        let _ = write!(s, "{},{},{},{}", i + 1, fmt_f64(d.y()[i]), fmt_f64(m.mu[i]), fmt_f64(m.eta[i]));
        for set in &sets {
            let _ = write!(s, ",{}", fmt_f64(set.values[i]));
        }
        s.push('\n');
    }
    Ok(s)
}

pub fn cmd_residuals(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    let d = load_dataset(cfg)?;
    let m = fit_dataset(cfg, &d)?;
    emit(cfg, stdout, &residual_table(cfg, &d, &m)?)?;
    Ok(convergence_code(&m))
}

fn envelope_csv(e: &EnvelopeData) -> String {
    let mut s = String::from("i,expected_halfnormal,abs_residual,lower,median,upper,outside\n");
    for i in 0..e.abs_residuals_sorted.len() {
        let r = e.abs_residuals_sorted[i];
        let outside = r < e.lower[i] || r > e.upper[i];
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            i + 1,
            fmt_f64(e.expected_halfnormal[i]),
            fmt_f64(r),
            fmt_f64(e.lower[i]),
            fmt_f64(e.median[i]),
            fmt_f64(e.upper[i]),
            u8::from(outside)
        );
    }
    s
}

fn predictor_csv(t: &PredictorTable) -> String {
    let mut s = String::from("i,eta,residual\n");
    for (i, (eta, r)) in t.eta.iter().zip(&t.residual).enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, fmt_f64(*eta), fmt_f64(*r));
    }
    s
}

/// Minimal SVG: envelope polylines, observed points and a zero line.
pub fn envelope_svg(e: &EnvelopeData) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 40.0;
    let xmax = e.expected_halfnormal.last().copied().unwrap_or(1.0).max(1e-9) * 1.05;
    let ymax = e
        .upper
        .iter()
        .chain(&e.abs_residuals_sorted)
        .copied()
        .fold(0.0, f64::max)
        .max(1e-9)
        * 1.05;
    let px = |x: f64| M + x / xmax * (W - 2.0 * M);
    let py = |y: f64| H - M - y / ymax * (H - 2.0 * M);
    let line = |v: &[f64]| -> String {
        e.expected_halfnormal
            .iter()
            .zip(v)
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<line x1="{M}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
        y0 = py(0.0),
        x1 = W - M
    );
    let _ = writeln!(s, r#"<line x1="{M}" y1="{M}" x2="{M}" y2="{y0:.2}" stroke="gray"/>"#, y0 = py(0.0));
    for (v, dash) in [(&e.lower, ""), (&e.median, r#" stroke-dasharray="2 2""#), (&e.upper, "")] {
        let _ = writeln!(s, r#"<polyline fill="none" stroke="black"{dash} points="{}"/>"#, line(v));
    }
    for (x, y) in e.expected_halfnormal.iter().zip(&e.abs_residuals_sorted) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="none" stroke="blue"/>"#, px(*x), py(*y));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.0}" y="{:.0}" font-size="12" text-anchor="middle">expected half-normal quantile</text>"#,
        W / 2.0,
        H - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{:.0}" font-size="12" transform="rotate(-90 12 {:.0})" text-anchor="middle">|{}| residual</text>"#,
        H / 2.0,
        H / 2.0,
        e.kind
    );
    s.push_str("</svg>\n");
    s
}

#[derive(Serialize)]
struct EnvelopeJson<'a> {
    envelopes: &'a [EnvelopeData],
    predictor: &'a [PredictorTable],
    seed: u64,
}

pub fn cmd_envelope(cfg: &RunConfig) -> Result<i32, CliError> {
    if cfg.sims == 0 {
        return Err(CliError::input("--sims must be at least 1"));
    }
    let d = load_dataset(cfg)?;
    let m = fit_dataset(cfg, &d)?;
    if !m.converged() {
        return Err(CliError {
            code: 2,
            kind: "convergence",
            message: format!("fit did not converge (gradient norm {:e})", m.convergence.gradient_norm),
        });
    }
    let dir = output_dir(cfg)?;
    let opts = EnvelopeOptions {
        n_sim: cfg.sims,
        execution: Execution::Parallel,
        ..Default::default()
    };
    let mut envelopes = Vec::new();
    let mut tables = Vec::new();
    for &kind in &cfg.kinds {
        envelopes.push(half_normal_envelope(&m, &d, kind, cfg.seed, &opts)?);
        tables.push(residual_vs_predictor(&m, &d, kind)?);
    }
    match cfg.format {
        Format::Json => write_file(
            &dir.join("envelope.json"),
            &to_json(&EnvelopeJson {
                envelopes: &envelopes,
                predictor: &tables,
                seed: cfg.seed,
            }),
        )?,
        Format::Csv => {
            let mut summary = String::from("kind,n_sim,points_outside,redraws\n");
            for (e, t) in envelopes.iter().zip(&tables) {
                write_file(&dir.join(format!("envelope_{}.csv", e.kind)), &envelope_csv(e))?;
                write_file(&dir.join(format!("predictor_{}.csv", t.kind)), &predictor_csv(t))?;
                let _ = writeln!(summary, "{},{},{},{}", e.kind, e.n_sim, e.points_outside, e.redraws);
            }
            write_file(&dir.join("envelope_summary.csv"), &summary)?;
        }
    }
    for e in &envelopes {
        write_file(&dir.join(format!("envelope_{}.svg", e.kind)), &envelope_svg(e))?;
    }
    Ok(0)
}

/// Tables-style per-observation CSV: one row per observation, then the
/// column mean and SD rows.
pub fn observations_csv(s: &StudySummary) -> String {
    let mut out = String::from("i,mu");
    for k in &s.kinds {
        for col in ["mean", "variance", "skewness", "kurtosis", "ad"] {
            let _ = write!(out, ",{k}_{col}");
        }
    }
    out.push('\n');
    let cells = |out: &mut String, cells: &[CellStats]| {
        for c in cells {
            let _ = write!(
                out,
                ",{},{},{},{},{}",
                fmt_f64(c.mean),
                fmt_f64(c.variance),
                fmt_opt(c.skewness),
                fmt_opt(c.kurtosis),
                fmt_f64(c.ad)
            );
        }
        out.push('\n');
    };
    for row in &s.observations {
        let _ = write!(out, "{},{}", row.index, fmt_f64(row.mu));
        cells(&mut out, &row.cells);
    }
    for row in &s.aggregates {
        let _ = write!(out, "{},{}", row.label, fmt_f64(row.mu));
        cells(&mut out, &row.cells);
    }
    out
}

/// One row per residual kind: mean, SD, minimum, quartiles and maximum of
/// the per-observation Anderson–Darling statistics.
pub fn ad_summary_csv(s: &StudySummary) -> String {
    let mut out = String::from("kind,mean,sd,min,q1,q2,q3,max\n");
    for a in &s.ad_summary {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            a.kind,
            fmt_f64(a.mean),
            fmt_f64(a.sd),
            fmt_f64(a.min),
            fmt_f64(a.q1),
            fmt_f64(a.q2),
            fmt_f64(a.q3),
            fmt_f64(a.max)
        );
    }
    out
}

/// Key/value description of the scenario actually simulated.
pub fn scenario_csv(s: &StudySummary) -> String {
    let sc = &s.scenario;
    let mut out = String::from("key,value\n");
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    kv("scenario", sc.id.to_string());
    kv("link", sc.link.to_string());
    for (j, b) in sc.beta.iter().enumerate() {
        kv(&format!("beta{}", j + 1), fmt_f64(*b));
    }
    kv("phi", fmt_f64(sc.phi));
    kv("n", sc.n.to_string());
    match sc.covariate_rule {
        CovariateRule::UniformAll => kv("covariate_rule", "uniform".to_string()),
        CovariateRule::ExpNormal { exp_mean } => {
            kv("covariate_rule", "exponential_normal".to_string());
            kv("exp_mean", fmt_f64(exp_mean));
        }
    }
    kv("seed", sc.master_seed.to_string());
    kv("reps", s.n_rep.to_string());
    kv("redraws", s.redraws.to_string());
    kv("design_fingerprint", format!("{:016x}", s.design_fingerprint));
    if let Some(c) = &sc.calibration {
        for (j, b) in c.logit_beta.iter().enumerate() {
            kv(&format!("logit_beta{}", j + 1), fmt_f64(*b));
        }
        kv("calibration_max_rel_error", fmt_f64(c.max_rel_error));
        for (name, t, a) in [
            ("mean", c.target.mean, c.achieved.mean),
            ("sd", c.target.sd, c.achieved.sd),
            ("min", c.target.min, c.achieved.min),
            ("max", c.target.max, c.achieved.max),
        ] {
            kv(&format!("target_mu_{name}"), fmt_f64(t));
            kv(&format!("achieved_mu_{name}"), fmt_f64(a));
        }
    }
    out
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<i32, CliError> {
    let spec = builtin_scenario(cfg.scenario, cfg.phi, cfg.n, cfg.link, cfg.seed)?;
    let opts = StudyOptions {
        execution: Execution::Parallel,
        ..Default::default()
    };
    let summary = run_study(&spec, cfg.reps, &cfg.kinds, &opts)?;
    let dir = output_dir(cfg)?;
    match cfg.format {
        Format::Json => write_file(&dir.join("study.json"), &to_json(&summary))?,
        Format::Csv => {
            write_file(&dir.join("observations.csv"), &observations_csv(&summary))?;
            write_file(&dir.join("ad_summary.csv"), &ad_summary_csv(&summary))?;
            write_file(&dir.join("scenario.csv"), &scenario_csv(&summary))?;
        }
    }
    Ok(0)
}

pub fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, CliError> {
    match cfg.command {
        Command::Fit => cmd_fit(cfg, stdout),
        Command::Residuals => cmd_residuals(cfg, stdout),
        Command::Envelope => cmd_envelope(cfg),
        Command::Simulate => cmd_simulate(cfg),
    }
}

/// Parses arguments, runs the command and returns the exit code. Errors
/// are written to `stderr` as one line of JSON.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let _ = writeln!(stderr, "{}", CliError::input(first.trim_start_matches("error: ")).to_json());
            return 1;
        }
    };
    let result = RunConfig::from_cli(cli).and_then(|cfg| {
        let mut buf: Vec<u8> = Vec::new();
        let code = with_threads(cfg.threads, || execute(&cfg, &mut buf))?;
        stdout
            .write_all(&buf)
            .map_err(|e| CliError::input(format!("stdout: {e}")))?;
        Ok(code)
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.to_json());
            e.code
        }
    }
}
