//! Command-line front end.
//!
//! Figure commands (`fig1`, `fig3`, `fig4`, `fig5`) emit the reference
//! variance curves as data files — CSV or JSON, never images. `analyze`
//! fits a problem file and reports diagnostics including the
//! full-correlation limit, `mc-validate` checks the analytic estimator
//! covariance against a seeded Monte Carlo run, and `rerun` replays any
//! earlier command from its manifest.
//!
//! Every file-writing command drops a `<out>.manifest.json` beside its
//! output recording the command, its resolved arguments, input digests,
//! and the toolkit version — enough to reproduce the output byte for byte.
//!
//! Exit codes: 0 success, 1 validation failure (`mc-validate` criterion),
//! 2 input error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::estimator::{blue_fit, two_point_mean_variance};
use crate::format::{Axis, CurveTable, Series};
use crate::monte_carlo::{empirical_estimator_covariance, McConfig};
use crate::problem::{load_problem, Problem};
use crate::sampling::{variance_curve_vs_delta, variance_curves_vs_n, SnrProfile};
use crate::subspace::limit_variance_prediction;
use crate::{Error, Result};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_VALIDATION_FAILURE: i32 = 1;
pub const EXIT_INPUT_ERROR: i32 = 2;

/// Monte Carlo acceptance: largest standardized covariance deviation
/// allowed before `mc-validate` fails.
pub const MC_PASS_STANDARD_ERRORS: f64 = 4.0;

#[derive(Debug, Parser)]
#[command(
    name = "correg",
    version,
    about = "Regression and measurement-design tools for strongly correlated Gaussian noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Variance of the optimal two-measurement mean across correlation strengths
    Fig1(Fig1Args),
    /// Mean-estimate variance vs correlation length, sloped signal-to-noise profile
    Fig3(Fig3Args),
    /// Mean-estimate variance vs measurement count at fixed correlation lengths
    Fig4(Fig4Args),
    /// Mean-estimate variance vs correlation length, flat signal-to-noise profile
    Fig5(Fig5Args),
    /// Fit a problem file and report estimates, weights, and limit diagnostics
    Analyze(AnalyzeArgs),
    /// Monte Carlo check of the analytic estimator covariance for a problem file
    McValidate(McValidateArgs),
    /// Replay a previous command from its manifest
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    fn flag_value(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Destination file; a manifest is written beside it
    #[arg(long)]
    pub out: PathBuf,
    /// Output encoding
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct ReportOutputArgs {
    /// Destination file (stdout when omitted); a manifest is written beside it
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Fig1Args {
    /// Noise level of the first measurement
    #[arg(long, default_value_t = 1.0)]
    pub sigma1: f64,
    /// Noise levels of the second measurement, one output column each
    #[arg(long, value_delimiter = ',',
          default_values_t = vec![0.5, 0.75, 0.95, 1.0, 1.05, 1.25, 1.5])]
    pub sigma2: Vec<f64>,
    /// Number of interior correlation grid points
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Half-width of the interior grid; exact ±1 rows are added from the
    /// closed-form limits
    #[arg(long, default_value_t = 0.999)]
    pub rho_span: f64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DeltaSweepArgs {
    /// Interval counts, one output column each
    #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 7])]
    pub n: Vec<usize>,
    /// Smallest correlation length
    #[arg(long, default_value_t = 0.01)]
    pub delta_min: f64,
    /// Largest correlation length
    #[arg(long, default_value_t = 100.0)]
    pub delta_max: f64,
    /// Number of log-spaced correlation lengths
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    /// Keep the profile's raw scale instead of rescaling to unit
    /// signal-to-noise at the right edge
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct Fig3Args {
    /// Slope of the linear signal-to-noise profile
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub sweep: DeltaSweepArgs,
}

#[derive(Debug, Args)]
pub struct Fig5Args {
    /// Slope of the linear signal-to-noise profile
    #[arg(long, default_value_t = 0.0)]
    pub alpha: f64,
    #[command(flatten)]
    pub sweep: DeltaSweepArgs,
}

#[derive(Debug, Args)]
pub struct Fig4Args {
    /// Slope of the linear signal-to-noise profile
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Correlation lengths, one series each (0 = uncorrelated noise)
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.2, 0.5, 1.0])]
    pub delta: Vec<f64>,
    /// Largest interval count; the grid runs 1..=n-max
    #[arg(long, default_value_t = 32)]
    pub n_max: usize,
    /// Keep the profile's raw scale instead of rescaling to unit
    /// signal-to-noise at the right edge
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Problem file (JSON)
    pub problem: PathBuf,
    /// Pair-correlation magnitude above which correlation signs are read off
    #[arg(long, default_value_t = 0.5)]
    pub sign_threshold: f64,
    #[command(flatten)]
    pub output: ReportOutputArgs,
}

#[derive(Debug, Args)]
pub struct McValidateArgs {
    /// Problem file (JSON)
    pub problem: PathBuf,
    /// Number of synthetic experiments
    #[arg(long, default_value_t = 100_000)]
    pub trials: usize,
    /// Reproducibility seed
    #[arg(long, default_value_t = 20_060_423)]
    pub seed: u64,
    /// True coefficients used for synthesis (defaults to all zeros)
    #[arg(long, value_delimiter = ',')]
    pub beta_true: Option<Vec<f64>>,
    /// Worker partition hint; never changes results
    #[arg(long, default_value_t = 1)]
    pub chunks: usize,
    #[command(flatten)]
    pub output: ReportOutputArgs,
}

#[derive(Debug, Args)]
pub struct RerunArgs {
    /// Manifest file written by a previous run
    pub manifest: PathBuf,
}

/// Reproducibility sidecar written next to every output file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Canonical argument vector with every flag resolved; `rerun` replays
    /// exactly this.
    pub argv: Vec<String>,
    pub parameters: Value,
    pub inputs: Vec<ManifestInput>,
    pub outputs: Vec<String>,
    pub version: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestInput {
    pub path: String,
    pub sha256: String,
}

/// Top-level dispatch: returns the process exit code, printing errors to
/// stderr.
pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Fig1(args) => cmd_fig1(args),
        Command::Fig3(args) => cmd_delta_sweep("fig3", args.alpha, args.sweep),
        Command::Fig4(args) => cmd_fig4(args),
        Command::Fig5(args) => cmd_delta_sweep("fig5", args.alpha, args.sweep),
        Command::Analyze(args) => cmd_analyze(args),
        Command::McValidate(args) => cmd_mc_validate(args),
        Command::Rerun(args) => cmd_rerun(args),
    }
}

fn join_floats(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn cmd_fig1(args: Fig1Args) -> Result<i32> {
    if !args.sigma1.is_finite() || args.sigma1 <= 0.0 {
        return Err(Error::NonPositiveSigma {
            index: 0,
            value: args.sigma1,
        });
    }
    if args.sigma2.is_empty() {
        return Err(Error::InvalidGrid {
            message: "at least one second noise level is required".into(),
        });
    }
    if args.grid < 2 {
        return Err(Error::InvalidGrid {
            message: format!("need at least 2 interior grid points, got {}", args.grid),
        });
    }
    if !args.rho_span.is_finite() || args.rho_span <= 0.0 || args.rho_span >= 1.0 {
        return Err(Error::InvalidGrid {
            message: format!(
                "the interior grid half-width must lie in (0, 1), got {}",
                args.rho_span
            ),
        });
    }

    // Interior grid plus exact endpoint rows: the closed form evaluates
    // the |ρ| = 1 limits exactly, where the generic matrix solve cannot.
    let mut rhos = Vec::with_capacity(args.grid + 2);
    rhos.push(-1.0);
    let step = 2.0 * args.rho_span / (args.grid - 1) as f64;
    for i in 0..args.grid {
        let rho = (-args.rho_span + i as f64 * step).clamp(-args.rho_span, args.rho_span);
        rhos.push(rho);
    }
    rhos.push(1.0);

    let mut series = Vec::with_capacity(args.sigma2.len());
    for &s2 in &args.sigma2 {
        let mut values = Vec::with_capacity(rhos.len());
        for &rho in &rhos {
            values.push(two_point_mean_variance(args.sigma1, s2, rho)?);
        }
        series.push(Series {
            name: format!("sigma2={s2}"),
            values,
        });
    }
    let table = CurveTable::new("rho", Axis::Points(rhos), series)?;

    let argv = vec![
        "fig1".into(),
        "--sigma1".into(),
        args.sigma1.to_string(),
        "--sigma2".into(),
        join_floats(&args.sigma2),
        "--grid".into(),
        args.grid.to_string(),
        "--rho-span".into(),
        args.rho_span.to_string(),
        "--out".into(),
        args.output.out.display().to_string(),
        "--format".into(),
        args.output.format.flag_value().into(),
    ];
    let parameters = json!({
        "sigma1": args.sigma1,
        "sigma2": args.sigma2,
        "grid": args.grid,
        "rho_span": args.rho_span,
        "format": args.output.format.flag_value(),
    });
    write_table("fig1", argv, parameters, &table, &args.output)?;
    Ok(EXIT_SUCCESS)
}

fn resolve_profile(alpha: f64, no_normalize: bool) -> Result<SnrProfile> {
    let base = SnrProfile::linear(1.0, alpha)?;
    Ok(if no_normalize {
        base
    } else {
        base.normalized()
    })
}

fn log_spaced_deltas(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if !min.is_finite() || min <= 0.0 {
        return Err(Error::InvalidDelta { delta: min });
    }
    if !max.is_finite() || max <= min {
        return Err(Error::InvalidGrid {
            message: format!("need delta-max > delta-min, got [{min}, {max}]"),
        });
    }
    if points < 2 {
        return Err(Error::InvalidGrid {
            message: format!("need at least 2 correlation-length points, got {points}"),
        });
    }
    let (lmin, lmax) = (min.ln(), max.ln());
    let step = (lmax - lmin) / (points - 1) as f64;
    let mut deltas: Vec<f64> = (0..points)
        .map(|i| (lmin + i as f64 * step).exp())
        .collect();
    // Pin the endpoints to the requested values exactly.
    deltas[0] = min;
    *deltas.last_mut().unwrap() = max;
    Ok(deltas)
}

fn cmd_delta_sweep(command: &str, alpha: f64, sweep: DeltaSweepArgs) -> Result<i32> {
    let profile = resolve_profile(alpha, sweep.no_normalize)?;
    let deltas = log_spaced_deltas(sweep.delta_min, sweep.delta_max, sweep.points)?;
    if sweep.n.is_empty() {
        return Err(Error::InvalidGrid {
            message: "at least one interval count is required".into(),
        });
    }
    let table = variance_curve_vs_delta(&profile, &deltas, &sweep.n, true)?;

    let mut argv = vec![
        command.to_string(),
        "--alpha".into(),
        alpha.to_string(),
        "--n".into(),
        join_usize(&sweep.n),
        "--delta-min".into(),
        sweep.delta_min.to_string(),
        "--delta-max".into(),
        sweep.delta_max.to_string(),
        "--points".into(),
        sweep.points.to_string(),
    ];
    if sweep.no_normalize {
        argv.push("--no-normalize".into());
    }
    argv.extend([
        "--out".into(),
        sweep.output.out.display().to_string(),
        "--format".into(),
        sweep.output.format.flag_value().into(),
    ]);
    let parameters = json!({
        "alpha": alpha,
        "n": sweep.n,
        "delta_min": sweep.delta_min,
        "delta_max": sweep.delta_max,
        "points": sweep.points,
        "normalized": !sweep.no_normalize,
        "format": sweep.output.format.flag_value(),
    });
    write_table(command, argv, parameters, &table, &sweep.output)?;
    Ok(EXIT_SUCCESS)
}

fn cmd_fig4(args: Fig4Args) -> Result<i32> {
    let profile = resolve_profile(args.alpha, args.no_normalize)?;
    if args.n_max < 1 {
        return Err(Error::InvalidGrid {
            message: "n-max must be at least 1".into(),
        });
    }
    let n_grid: Vec<usize> = (1..=args.n_max).collect();
    let table = variance_curves_vs_n(&profile, &args.delta, &n_grid)?;

    let mut argv = vec![
        "fig4".to_string(),
        "--alpha".into(),
        args.alpha.to_string(),
        "--delta".into(),
        join_floats(&args.delta),
        "--n-max".into(),
        args.n_max.to_string(),
    ];
    if args.no_normalize {
        argv.push("--no-normalize".into());
    }
    argv.extend([
        "--out".into(),
        args.output.out.display().to_string(),
        "--format".into(),
        args.output.format.flag_value().into(),
    ]);
    let parameters = json!({
        "alpha": args.alpha,
        "delta": args.delta,
        "n_max": args.n_max,
        "normalized": !args.no_normalize,
        "format": args.output.format.flag_value(),
    });
    write_table("fig4", argv, parameters, &table, &args.output)?;
    Ok(EXIT_SUCCESS)
}

/// The `analyze` report body, shared with tests.
pub fn analyze_report(problem: &Problem, sign_threshold: f64) -> Result<Value> {
    let x = &problem.design;
    let sigma = problem.covariance();
    let correlation = problem.model.correlation();

    let (fit, fit_error, negative_weights) = match blue_fit(&problem.y, x, &sigma) {
        Ok(result) => {
            let w = &result.weights;
            let flagged: Vec<usize> = (0..w.ncols())
                .filter(|&j| (0..w.nrows()).any(|i| w[(i, j)] < 0.0))
                .collect();
            let negative = json!({
                "any": !flagged.is_empty(),
                "measurements": flagged,
            });
            let fit_json: Value = serde_json::from_str(&result.to_json())?;
            (fit_json, Value::Null, negative)
        }
        Err(e) => (Value::Null, json!(e.to_string()), Value::Null),
    };

    let (limit, limit_error) = match correlation.sign_vector(sign_threshold) {
        Ok(signs) => match limit_variance_prediction(x, problem.model.sigmas(), &signs) {
            Ok(report) => {
                let report_json: Value = serde_json::from_str(&report.to_json())?;
                (report_json, Value::Null)
            }
            Err(e) => (Value::Null, json!(e.to_string())),
        },
        Err(e) => (Value::Null, json!(e.to_string())),
    };

    Ok(json!({
        "n": problem.n(),
        "m": problem.m(),
        "design_rank": x.rank(),
        "kappa": correlation.kappa(),
        "sign_threshold": sign_threshold,
        "fit": fit,
        "fit_error": fit_error,
        "negative_weights": negative_weights,
        "limit": limit,
        "limit_error": limit_error,
    }))
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<i32> {
    let problem = load_problem(&args.problem)?;
    let report = analyze_report(&problem, args.sign_threshold)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";

    let mut argv = vec![
        "analyze".to_string(),
        args.problem.display().to_string(),
        "--sign-threshold".into(),
        args.sign_threshold.to_string(),
    ];
    if let Some(out) = &args.output.out {
        argv.extend(["--out".into(), out.display().to_string()]);
    }
    let parameters = json!({
        "problem": args.problem.display().to_string(),
        "sign_threshold": args.sign_threshold,
    });
    emit_report(
        "analyze",
        argv,
        parameters,
        &[&args.problem],
        &args.output,
        &text,
    )?;
    Ok(EXIT_SUCCESS)
}

fn cmd_mc_validate(args: McValidateArgs) -> Result<i32> {
    let problem = load_problem(&args.problem)?;
    let m = problem.m();
    let beta_true = match &args.beta_true {
        Some(values) => {
            if values.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "true coefficient vector",
                    expected: m,
                    actual: values.len(),
                });
            }
            DVector::from_vec(values.clone())
        }
        None => DVector::zeros(m),
    };

    let config =
        McConfig::new(args.trials, args.seed, beta_true.clone()).with_parallel_chunks(args.chunks);
    let report = empirical_estimator_covariance(&problem.design, &problem.covariance(), &config)?;
    let pass = report.max_standardized_deviation <= MC_PASS_STANDARD_ERRORS;
    let doc = json!({
        "pass": pass,
        "threshold_standard_errors": MC_PASS_STANDARD_ERRORS,
        "report": report.to_json(),
    });
    let text = serde_json::to_string_pretty(&doc)? + "\n";

    let mut argv = vec![
        "mc-validate".to_string(),
        args.problem.display().to_string(),
        "--trials".into(),
        args.trials.to_string(),
        "--seed".into(),
        args.seed.to_string(),
        "--beta-true".into(),
        join_floats(beta_true.as_slice()),
        "--chunks".into(),
        args.chunks.to_string(),
    ];
    if let Some(out) = &args.output.out {
        argv.extend(["--out".into(), out.display().to_string()]);
    }
    let parameters = json!({
        "problem": args.problem.display().to_string(),
        "trials": args.trials,
        "seed": args.seed,
        "beta_true": beta_true.as_slice(),
        "chunks": args.chunks,
    });
    emit_report(
        "mc-validate",
        argv,
        parameters,
        &[&args.problem],
        &args.output,
        &text,
    )?;
    Ok(if pass {
        EXIT_SUCCESS
    } else {
        EXIT_VALIDATION_FAILURE
    })
}

fn cmd_rerun(args: RerunArgs) -> Result<i32> {
    let text = fs::read_to_string(&args.manifest)?;
    let manifest: RunManifest = serde_json::from_str(&text)?;
    if manifest.argv.first().map(String::as_str) == Some("rerun") {
        return Err(Error::ProblemValidation {
            field: "manifest.argv".into(),
            message: "refusing to replay a rerun manifest".into(),
        });
    }
    // The inputs must be what they were: replaying against modified inputs
    // would silently produce different outputs under the same manifest.
    for input in &manifest.inputs {
        let current = sha256_hex(Path::new(&input.path))?;
        if current != input.sha256 {
            return Err(Error::ProblemValidation {
                field: format!("inputs[{}]", input.path),
                message: format!(
                    "digest mismatch: manifest records {}, file now hashes to {current}",
                    input.sha256
                ),
            });
        }
    }
    let full = std::iter::once("correg".to_string()).chain(manifest.argv.iter().cloned());
    let cli = Cli::try_parse_from(full).map_err(|e| Error::ProblemValidation {
        field: "manifest.argv".into(),
        message: e.to_string(),
    })?;
    execute(cli)
}

fn sha256_hex(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_os_string();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn write_table(
    command: &str,
    argv: Vec<String>,
    parameters: Value,
    table: &CurveTable,
    output: &OutputArgs,
) -> Result<()> {
    let content = match output.format {
        OutputFormat::Csv => table.to_csv(),
        OutputFormat::Json => table.to_json(),
    };
    write_with_manifest(command, argv, parameters, &[], &output.out, &content)
}

fn emit_report(
    command: &str,
    argv: Vec<String>,
    parameters: Value,
    inputs: &[&Path],
    output: &ReportOutputArgs,
    text: &str,
) -> Result<()> {
    match &output.out {
        Some(out) => write_with_manifest(command, argv, parameters, inputs, out, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_with_manifest(
    command: &str,
    argv: Vec<String>,
    parameters: Value,
    inputs: &[&Path],
    out: &Path,
    content: &str,
) -> Result<()> {
    fs::write(out, content)?;
    let manifest = RunManifest {
        command: command.into(),
        argv,
        parameters,
        inputs: inputs
            .iter()
            .map(|p| {
                Ok(ManifestInput {
                    path: p.display().to_string(),
                    sha256: sha256_hex(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        outputs: vec![out.display().to_string()],
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let manifest_text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(manifest_path(out), manifest_text)?;
    Ok(())
}
