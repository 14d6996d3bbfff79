//! Argument parsing and the four subcommands.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riviv_core::confsets::{default_grid, point_estimate, ConfidenceSet, GridSpec, Inverter};
use riviv_core::estimators::{probe_at_offset, sensitivity_curve, EstimatorKind, FitOptions};
use riviv_core::ivtests::{fit_reduced_form, run_test, StatKind, DEFAULT_SIMS};
use riviv_core::numerics::RngStream;
use riviv_core::Dataset;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{resolve_study, GridArg, Preset, ScenarioOverrides, StudyFile};
use crate::data::DataSchema;
use crate::error::{AppError, AppResult};
use crate::parallel;
use crate::report::{power_csv, power_table, write_atomic, RunReport, Software, Timing};

pub const DEFAULT_SEED: u64 = 20240325;

#[derive(Debug, Parser)]
#[command(name = "riviv", version, about = "Outlier-resistant weak-instrument inference for linear IV models")]
pub struct Cli {
    /// Worker threads for replications and grid evaluation (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Also print the JSON report on stdout.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test H0: beta = beta0 on a CSV dataset.
    Test(TestArgs),
    /// Confidence set by test inversion over a grid of beta0 values.
    Confset(ConfsetArgs),
    /// Monte Carlo rejection frequencies over a grid of true beta values.
    Power(PowerArgs),
    /// Coefficient displacement when a probe point is added, LS beside Mallows.
    Sensitivity(SensitivityArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorArg {
    Ls,
    Mallows,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(e: EstimatorArg) -> Self {
        match e {
            EstimatorArg::Ls => EstimatorKind::Ls,
            EstimatorArg::Mallows => EstimatorKind::MallowsHuber,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestArg {
    Rar,
    Rk,
    Rclr,
    Rw,
}

impl From<TestArg> for StatKind {
    fn from(t: TestArg) -> Self {
        match t {
            TestArg::Rar => StatKind::Rar,
            TestArg::Rk => StatKind::Rk,
            TestArg::Rclr => StatKind::Rclr,
            TestArg::Rw => StatKind::Rw,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// Outcome column.
    #[arg(long)]
    pub y: String,
    /// Endogenous regressor column.
    #[arg(long)]
    pub x: String,
    /// Instrument columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub z: Vec<String>,
    /// Exogenous control columns, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub w: Vec<String>,
    /// Leave the intercept out of both reduced-form regressions.
    #[arg(long)]
    pub no_intercept: bool,
}

impl DataArgs {
    pub fn schema(&self) -> DataSchema {
        DataSchema {
            csv: self.csv.clone(),
            y: self.y.clone(),
            x: self.x.clone(),
            z: self.z.clone(),
            w: self.w.clone(),
            intercept: !self.no_intercept,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct InferenceArgs {
    #[arg(long, value_enum, default_value = "mallows")]
    pub estimator: EstimatorArg,
    #[arg(long, value_enum, default_value = "rclr")]
    pub test: TestArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Simulated draws for conditional CLR critical values.
    #[arg(long, default_value_t = DEFAULT_SIMS)]
    pub sims: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

impl InferenceArgs {
    fn check(&self) -> AppResult<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AppError::input(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.sims == 0 {
            return Err(AppError::input("--sims must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceArgs,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta0: f64,
    /// Write the JSON report here.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ConfsetArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceArgs,
    /// beta0 grid as lo:hi:points (default: data-driven around the 2SLS estimate).
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<GridArg>,
    /// Include every grid evaluation in the report.
    #[arg(long)]
    pub points: bool,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PowerArgs {
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// TOML study file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub scenario: ScenarioOverrides,
    /// Tests to run, e.g. CLR,RCLR,AR,RAR.
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,
    /// True-beta grid as lo:hi:points.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<GridArg>,
    /// Power-curve CSV path.
    #[arg(long, default_value = "power.csv")]
    #[serde(skip)]
    pub curve: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SensitivityArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Probe instrument values (default: column means plus one standard deviation).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub probe_z: Option<Vec<f64>>,
    /// Probe control values (default: column means).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub probe_w: Option<Vec<f64>>,
    /// Outcome offsets of the probe above the LS fitted value.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,100,1000,10000")]
    pub magnitudes: Vec<f64>,
    /// Contamination fractions in [0, 0.5).
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    pub fractions: Vec<f64>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Result of a command: the report, a human-readable summary, warnings and
/// files to write once everything has succeeded.
#[derive(Debug)]
pub struct Outcome {
    pub report: RunReport,
    pub text: String,
    pub warnings: Vec<String>,
    pub files: Vec<(PathBuf, Vec<u8>)>,
}

fn opts(est: EstimatorArg, schema: &DataSchema) -> FitOptions {
    FitOptions {
        estimator: est.into(),
        intercept: schema.intercept,
        ..FitOptions::default()
    }
}

fn load(data: &DataArgs) -> AppResult<(DataSchema, Dataset)> {
    let schema = data.schema();
    let d = schema.load()?;
    Ok((schema, d))
}

fn report(command: &str, seed: u64, inputs: &impl Serialize, outputs: serde_json::Value) -> RunReport {
    RunReport {
        command: command.into(),
        software: Software::default(),
        seed,
        inputs: serde_json::to_value(inputs).expect("arguments serialize"),
        outputs,
        timing: Timing {
            elapsed_seconds: 0.0,
            threads: rayon::current_num_threads(),
        },
    }
}

fn json_file(out: &Option<PathBuf>) -> Vec<(PathBuf, Vec<u8>)> {
    out.iter().map(|p| (p.clone(), Vec::new())).collect()
}

pub fn cmd_test(args: &TestArgs) -> AppResult<Outcome> {
    args.inference.check()?;
    if !args.beta0.is_finite() {
        return Err(AppError::input("--beta0 must be finite"));
    }
    let (schema, data) = load(&args.data)?;
    let inf = &args.inference;
    let fit = fit_reduced_form(&data, &opts(inf.estimator, &schema)).map_err(|e| schema.explain(e))?;
    let kind: StatKind = inf.test.into();
    let out = run_test(&fit, args.beta0, kind, inf.alpha, inf.sims, &mut RngStream::new(inf.seed, 0))?;
    let decision = if out.reject { "reject" } else { "accept" };
    let text = format!(
        "{} ({:?}) H0: beta = {}\n  n = {}, k = {}, controls = {}\n  statistic      {:.6}\n  critical value {:.6}\n  p-value        {:.6}\n  decision at alpha = {}: {decision}\n",
        kind.name().to_uppercase(),
        inf.estimator,
        args.beta0,
        data.n(),
        data.k(),
        data.p(),
        out.statistic.value,
        out.critical_value,
        out.p_value,
        inf.alpha,
    );
    let outputs = json!({
        "n": data.n(),
        "k": data.k(),
        "p": data.p(),
        "test": kind,
        "estimator": fit.method,
        "beta0": args.beta0,
        "statistic": out.statistic.value,
        "w_tilde": out.statistic.w_tilde,
        "critical_value": out.critical_value,
        "p_value": out.p_value,
        "reject": out.reject,
        "alpha": inf.alpha,
        "delta_hat": fit.delta_hat,
        "pi_hat": fit.pi_hat,
    });
    Ok(Outcome {
        report: report("test", inf.seed, args, outputs),
        text,
        warnings: Vec::new(),
        files: json_file(&args.out),
    })
}

pub fn cmd_confset(args: &ConfsetArgs) -> AppResult<Outcome> {
    args.inference.check()?;
    let (schema, data) = load(&args.data)?;
    let inf = &args.inference;
    let fit = fit_reduced_form(&data, &opts(inf.estimator, &schema)).map_err(|e| schema.explain(e))?;
    let grid = match args.grid {
        Some(g) => GridSpec::new(g.lo, g.hi, g.points)?,
        None => default_grid(&data, schema.intercept).map_err(|e| schema.explain(e))?,
    };
    let kind: StatKind = inf.test.into();
    let inverter = Inverter::new(&fit, kind, inf.alpha, inf.sims, &mut RngStream::new(inf.seed, 0))?;
    let set = parallel::invert(&inverter, &grid)?;
    let mut warnings = Vec::new();
    if set.is_empty() {
        warnings.push(format!(
            "the {}% confidence set is empty: every grid value was rejected",
            100.0 * set.level
        ));
    }
    let estimate = point_estimate(&fit).ok();
    let text = format!(
        "{}% {} confidence set ({:?}): {set}\n",
        100.0 * set.level,
        kind.name().to_uppercase(),
        inf.estimator
    );
    let outputs = confset_outputs(&set, estimate, args.points);
    Ok(Outcome {
        report: report("confset", inf.seed, args, outputs),
        text,
        warnings,
        files: json_file(&args.out),
    })
}

fn confset_outputs(set: &ConfidenceSet, estimate: Option<(f64, f64)>, points: bool) -> serde_json::Value {
    let mut v = json!({
        "set": set.to_string(),
        "intervals": set.intervals,
        "level": set.level,
        "test": set.test,
        "estimator": set.estimator,
        "bounded": set.is_bounded(),
        "empty": set.is_empty(),
        "grid": set.grid,
        "point_estimate": estimate.map(|e| e.0),
        "point_estimate_se": estimate.map(|e| e.1),
    });
    if points {
        v["points"] = serde_json::to_value(&set.points).expect("grid points serialize");
    }
    v
}

pub fn cmd_power(args: &PowerArgs) -> AppResult<Outcome> {
    let file = args.config.as_deref().map(StudyFile::load).transpose()?;
    let study = resolve_study(file.as_ref(), args.preset, &args.scenario, args.tests.as_deref(), args.grid)?;
    let curve = parallel::power_curve(&study.scenario, &study.betas, &study.tests)?;
    let csv = power_csv(&curve);
    let mut files = vec![(args.curve.clone(), csv.into_bytes())];
    files.extend(json_file(&args.out));
    let text = format!(
        "preset {:?}, pi = {}, reps = {}, H0: beta = {}\n{}",
        study.preset,
        study.scenario.pi,
        study.scenario.reps,
        study.scenario.beta0,
        power_table(&curve)
    );
    let mut warnings = Vec::new();
    let failed: usize = curve.failures.iter().sum();
    if failed > 0 {
        warnings.push(format!("{failed} replications failed and were left out"));
    }
    let inputs = json!({ "args": args, "study": study });
    Ok(Outcome {
        report: report("power", study.scenario.seed, &inputs, json!({ "curve": curve, "csv": args.curve })),
        text,
        warnings,
        files,
    })
}

// Column means shifted by `sds` standard deviations.
fn column_offsets(m: &riviv_core::numerics::Mat, sds: f64) -> Vec<f64> {
    (0..m.cols())
        .map(|j| {
            let c = m.column(j);
            let n = c.len() as f64;
            let mean = c.iter().sum::<f64>() / n;
            let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            mean + sds * var.sqrt()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub fraction: f64,
    pub magnitude: f64,
    pub copies: usize,
    pub ls: f64,
    pub mallows: f64,
}

pub fn cmd_sensitivity(args: &SensitivityArgs) -> AppResult<Outcome> {
    let (schema, data) = load(&args.data)?;
    if args.magnitudes.iter().any(|m| !m.is_finite()) {
        return Err(AppError::input("--magnitudes must be finite"));
    }
    let z = args.probe_z.clone().unwrap_or_else(|| column_offsets(&data.z, 1.0));
    let w = args.probe_w.clone().unwrap_or_else(|| column_offsets(&data.w, 0.0));
    if z.len() != data.k() || w.len() != data.p() {
        return Err(AppError::input(format!(
            "probe needs {} instrument and {} control values, got {} and {}",
            data.k(),
            data.p(),
            z.len(),
            w.len()
        )));
    }
    let ls = opts(EstimatorArg::Ls, &schema);
    let mallows = opts(EstimatorArg::Mallows, &schema);
    let mut rows = Vec::new();
    for &m in &args.magnitudes {
        let probe = probe_at_offset(&data, schema.intercept, &z, &w, m).map_err(|e| schema.explain(e))?;
        let a = sensitivity_curve(&ls, &data, &probe, &args.fractions).map_err(|e| schema.explain(e))?;
        let b = sensitivity_curve(&mallows, &data, &probe, &args.fractions).map_err(|e| schema.explain(e))?;
        for (p, q) in a.iter().zip(&b) {
            rows.push(SensitivityRow {
                fraction: p.t,
                magnitude: m,
                copies: p.copies,
                ls: p.displacement,
                mallows: q.displacement,
            });
        }
    }
    let mut text = format!("{:>9} {:>12} {:>6} {:>14} {:>14}\n", "fraction", "magnitude", "copies", "ls", "mallows");
    for r in &rows {
        text += &format!(
            "{:>9} {:>12} {:>6} {:>14.6e} {:>14.6e}\n",
            r.fraction, r.magnitude, r.copies, r.ls, r.mallows
        );
    }
    let outputs = json!({ "probe_z": z, "probe_w": w, "rows": rows });
    Ok(Outcome {
        report: report("sensitivity", 0, args, outputs),
        text,
        warnings: Vec::new(),
        files: json_file(&args.out),
    })
}

pub fn execute(cli: &Cli) -> AppResult<Outcome> {
    let pool = parallel::thread_pool(cli.threads)?;
    let start = Instant::now();
    let mut outcome = pool.install(|| match &cli.command {
        Command::Test(a) => cmd_test(a),
        Command::Confset(a) => cmd_confset(a),
        Command::Power(a) => cmd_power(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
    })?;
    outcome.report.timing = Timing {
        elapsed_seconds: start.elapsed().as_secs_f64(),
        threads: pool.current_num_threads(),
    };
    let json = outcome.report.to_json();
    for (path, bytes) in &mut outcome.files {
        if bytes.is_empty() {
            *bytes = json.clone().into_bytes();
        }
        write_atomic(path, bytes)?;
    }
    Ok(outcome)
}

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for input errors, 2 for numerical failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(o) => {
            print!("{}", o.text);
            if cli.json {
                println!("{}", o.report.to_json());
            }
            for w in &o.warnings {
                eprintln!("warning: {w}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
