//! `preisach` command-line front end.
//!
//! Reports go to standard output as `key=value` lines; files are only written
//! where an output flag names them.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use preisach::dataio::{self, CurvatureSeries, KernelDocument, PreprocessOptions};
use preisach::operator::eval_discrete;
use preisach::relay::switch_indices;
use preisach::synth::{self, InputProgram};
use preisach::{Error, Grid, Relay, RelayState};

pub const EXIT_IO: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "preisach", version, about = "Preisach hysteresis kernel identification and prediction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Identify a piecewise-constant kernel from a `t,kappa,moment` CSV.
    Fit(FitArgs),
    /// Evaluate a fitted kernel on a curvature history.
    Predict(PredictArgs),
    /// Trace a single relay driven by sin(t).
    RelayDemo(RelayDemoArgs),
    /// Generate a synthetic dataset and its ground-truth kernel.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Measured series, header `t,kappa,moment`.
    #[arg(long)]
    pub input: PathBuf,
    /// Kernel JSON to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Curvature quantization step.
    #[arg(long)]
    pub d: f64,
    /// Fixed input ceiling (multiple of d); default rounds the maximum up to the grid.
    #[arg(long)]
    pub kmax: Option<f64>,
    #[arg(long = "svd-tol", default_value_t = preisach::DEFAULT_SVD_TOL)]
    pub svd_tol: f64,
    /// Constrain cell integrals to be nonnegative.
    #[arg(long)]
    pub nonneg: bool,
    /// Shift curvature so its minimum is zero.
    #[arg(long)]
    pub offset: bool,
    /// Saturate curvature outside [0, kmax] instead of rejecting it.
    #[arg(long)]
    pub clamp: bool,
    /// Contiguous-block cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Kernel heatmap CSV to write.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Kernel JSON produced by `fit` or `synth`.
    #[arg(long)]
    pub kernel: PathBuf,
    /// Curvature history, header `t,kappa[,moment]`.
    #[arg(long)]
    pub input: PathBuf,
    /// `kappa,moment` trace to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Expected grid step; must match the kernel.
    #[arg(long)]
    pub d: Option<f64>,
    /// Expected ceiling; must match the kernel.
    #[arg(long)]
    pub kmax: Option<f64>,
    #[arg(long)]
    pub offset: bool,
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Args)]
pub struct RelayDemoArgs {
    #[arg(long, default_value_t = -0.3, allow_hyphen_values = true)]
    pub a1: f64,
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub a2: f64,
    /// Initial output, -1 or 1.
    #[arg(long, default_value_t = 1, allow_hyphen_values = true)]
    pub xi0: i8,
    #[arg(long = "t-end", default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// `t,v,w` CSV to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProgramKind {
    /// Nested first-order reversal curves.
    Forc,
    /// Repeated major cycles between kmax and a valley.
    Cycles,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub d: f64,
    /// Number of grid levels.
    #[arg(long, conflicts_with = "kmax")]
    pub m: Option<u32>,
    #[arg(long)]
    pub kmax: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// RMS of additive Gaussian noise on the moment.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = ProgramKind::Forc)]
    pub program: ProgramKind,
    /// Cycle count for `--program cycles`.
    #[arg(long, default_value_t = 3)]
    pub cycles: usize,
    /// Valley of `--program cycles` as a fraction of kmax.
    #[arg(long, default_value_t = 0.0)]
    pub low: f64,
    /// Raw samples per ramp (default: one per grid step).
    #[arg(long = "samples-per-branch")]
    pub samples_per_branch: Option<usize>,
    /// Dataset CSV to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Ground-truth kernel JSON to write.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } => EXIT_IO,
            Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            e if e.is_validation() => EXIT_VALIDATION,
            _ => EXIT_NONCONVERGENCE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError {
        code: EXIT_VALIDATION,
        message: msg.into(),
    }
}

fn report_io(e: std::io::Error) -> CliError {
    CliError {
        code: EXIT_IO,
        message: format!("writing report: {e}"),
    }
}

/// Parses `args` (program name first) and runs the command, writing the report to `out`.
pub fn run<I, S, W>(args: I, out: &mut W) -> Result<(), CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
    W: Write,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        use clap::error::ErrorKind;
        let code = match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
            _ => EXIT_VALIDATION,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    })?;
    execute(&cli.command, out)
}

pub fn execute<W: Write>(command: &Command, out: &mut W) -> Result<(), CliError> {
    match command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::RelayDemo(a) => cmd_relay_demo(a, out),
        Command::Synth(a) => cmd_synth(a, out),
    }
}

fn check_d(d: f64) -> Result<(), CliError> {
    if d.is_finite() && d > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("--d must be positive, got {d}")))
    }
}

pub fn cmd_fit<W: Write>(args: &FitArgs, out: &mut W) -> Result<(), CliError> {
    check_d(args.d)?;
    if !(args.svd_tol > 0.0 && args.svd_tol < 1.0) {
        return Err(invalid(format!("--svd-tol must lie in (0, 1), got {}", args.svd_tol)));
    }
    if matches!(args.folds, Some(k) if k < 2) {
        return Err(invalid("--folds needs at least 2"));
    }
    let series = dataio::load_csv::<f64>(&args.input)?;
    let opts = PreprocessOptions {
        d: args.d,
        offset: args.offset,
        kmax: args.kmax,
        clamp: args.clamp,
    };
    let q = dataio::preprocess(&series, &opts)?;
    let sys = preisach::assemble(&q.grid, &q.levels, &q.moment)?;
    let fit = if args.nonneg {
        preisach::solve_nonneg(&sys, args.svd_tol)?
    } else {
        preisach::solve(&sys, args.svd_tol)?
    };
    dataio::export_kernel(&fit, &args.output)?;
    if let Some(path) = &args.heatmap {
        dataio::export_heatmap(&fit.grid, &fit.kernel, path)?;
    }

    let mut lines = vec![
        ("samples_raw", series.len().to_string()),
        ("samples", sys.samples().to_string()),
        ("unknowns", sys.unknowns().to_string()),
        ("d", fit.grid.d().to_string()),
        ("m", fit.grid.m().to_string()),
        ("kmax", fit.grid.kmax().to_string()),
        ("offset", q.offset.to_string()),
        ("q", fit.rank.to_string()),
        ("residual_rms", format!("{:e}", fit.residual_rms)),
        ("objective", format!("{:e}", fit.objective)),
        ("kkt_residual", format!("{:e}", fit.kkt_residual)),
    ];
    if let Some(folds) = args.folds {
        for (k, f) in preisach::cross_validate(&sys, folds, args.svd_tol)?.iter().enumerate() {
            lines.push(("fold", format!("{k} start={} end={} train_rms={:e} heldout_rms={:e}", f.start, f.end, f.train_rms, f.heldout_rms)));
        }
    }
    write_report(out, &lines)
}

fn write_report<W: Write>(out: &mut W, lines: &[(&str, String)]) -> Result<(), CliError> {
    for (k, v) in lines {
        writeln!(out, "{k}={v}").map_err(report_io)?;
    }
    Ok(())
}

fn rms(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (mut sq, mut n) = (0.0, 0usize);
    for (a, b) in pairs {
        sq += (a - b) * (a - b);
        n += 1;
    }
    (sq / n.max(1) as f64).sqrt()
}

pub fn cmd_predict<W: Write>(args: &PredictArgs, out: &mut W) -> Result<(), CliError> {
    let doc = dataio::import_kernel(&args.kernel)?;
    let (grid, kernel): (Grid, _) = doc.kernel()?;
    if let Some(d) = args.d {
        check_d(d)?;
        if (d - grid.d()).abs() > 1e-12 * grid.d() {
            return Err(invalid(format!("--d {d} does not match kernel grid d = {}", grid.d())));
        }
    }
    if let Some(kmax) = args.kmax {
        if (kmax - grid.kmax()).abs() > 1e-9 * grid.kmax() {
            return Err(invalid(format!(
                "--kmax {kmax} does not match kernel grid kmax = {} (m = {})",
                grid.kmax(),
                grid.m()
            )));
        }
    }
    let series: CurvatureSeries<f64> = dataio::load_curvature_csv(&args.input)?;
    let opts = PreprocessOptions {
        d: grid.d(),
        offset: args.offset,
        kmax: Some(grid.kmax()),
        clamp: args.clamp,
    };
    let (_, _, levels) = dataio::quantize_series(&series.kappa, &opts)?;
    let predicted = eval_discrete(&grid, &kernel, &levels)?;
    let trace: Vec<(f64, f64)> = series.kappa.iter().copied().zip(predicted.iter().copied()).collect();
    dataio::export_loop(&trace, &args.output)?;

    let mut lines = vec![
        ("samples", series.kappa.len().to_string()),
        ("d", grid.d().to_string()),
        ("m", grid.m().to_string()),
        ("kmax", grid.kmax().to_string()),
    ];
    if let Some(measured) = &series.moment {
        // the last sample of each constant-level run, as used by `fit`
        let kept: Vec<usize> = (0..levels.len())
            .filter(|&i| i + 1 == levels.len() || levels[i + 1] != levels[i])
            .collect();
        let collapsed = rms(kept.iter().map(|&i| (predicted[i], measured[i])));
        let all = rms(predicted.iter().copied().zip(measured.iter().copied()));
        lines.push(("rms_error", format!("{collapsed:e}")));
        lines.push(("rms_error_all_samples", format!("{all:e}")));
    }
    write_report(out, &lines)
}

pub fn cmd_relay_demo<W: Write>(args: &RelayDemoArgs, out: &mut W) -> Result<(), CliError> {
    let initial = RelayState::from_sign(args.xi0).map_err(|e| invalid(e.to_string()))?;
    let relay = Relay::new(args.a1, args.a2, initial).map_err(|e| invalid(e.to_string()))?;
    if args.samples < 2 {
        return Err(invalid("--samples needs at least 2"));
    }
    if !(args.t_end.is_finite() && args.t_end > 0.0) {
        return Err(invalid("--t-end must be positive"));
    }
    let step = args.t_end / (args.samples - 1) as f64;
    let t: Vec<f64> = (0..args.samples).map(|i| i as f64 * step).collect();
    let v: Vec<f64> = t.iter().map(|x| x.sin()).collect();
    let w = relay.trajectory(&v)?;
    let switches = switch_indices(&w);

    if let Some(path) = &args.output {
        let file = File::create(path).map_err(|e| CliError::from(Error::Io { path: path.clone(), source: e }))?;
        write_relay_csv(BufWriter::new(file), &t, &v, &w)
            .map_err(|e| CliError::from(Error::Io { path: path.clone(), source: e }))?;
    }
    let times: Vec<String> = switches.iter().map(|&i| t[i].to_string()).collect();
    write_report(
        out,
        &[
            ("samples", args.samples.to_string()),
            ("switches", switches.len().to_string()),
            ("switch_times", times.join(",")),
        ],
    )
}

fn write_relay_csv<W: Write>(mut out: W, t: &[f64], v: &[f64], w: &[RelayState]) -> std::io::Result<()> {
    writeln!(out, "t,v,w")?;
    for i in 0..t.len() {
        writeln!(out, "{},{},{}", t[i], v[i], w[i].sign())?;
    }
    out.flush()
}

pub fn cmd_synth<W: Write>(args: &SynthArgs, out: &mut W) -> Result<(), CliError> {
    check_d(args.d)?;
    if !(args.noise.is_finite() && args.noise >= 0.0) {
        return Err(invalid("--noise must be >= 0"));
    }
    let grid = match (args.m, args.kmax) {
        (Some(m), None) => Grid::new(args.d, m)?,
        (None, Some(kmax)) => Grid::with_kmax(args.d, kmax)?,
        (None, None) => return Err(invalid("synth needs --m or --kmax")),
        (Some(_), Some(_)) => return Err(invalid("--m and --kmax conflict")),
    };
    let program = match args.program {
        ProgramKind::Forc => synth::forc_program(&grid),
        ProgramKind::Cycles => {
            if !(0.0..1.0).contains(&args.low) {
                return Err(invalid("--low must lie in [0, 1)"));
            }
            if args.cycles == 0 {
                return Err(invalid("--cycles must be positive"));
            }
            let low = grid.value(grid.quantize(args.low * grid.kmax())?);
            InputProgram::cycles(0.0, grid.kmax(), low, args.cycles, None)?
        }
    };
    let program = match args.samples_per_branch {
        Some(k) => program.with_samples(k)?,
        None => program,
    };
    let truth = synth::make_truth(&grid, args.seed);
    let series = synth::simulate(&grid, &truth, &program, args.noise, args.seed)?;
    dataio::save_csv(&series, &args.output)?;
    if let Some(path) = &args.truth {
        dataio::write_kernel_document(&KernelDocument::from_kernel(&grid, &truth), path)?;
    }
    write_report(
        out,
        &[
            ("samples", series.len().to_string()),
            ("d", grid.d().to_string()),
            ("m", grid.m().to_string()),
            ("kmax", grid.kmax().to_string()),
            ("unknowns", grid.unknowns().to_string()),
            ("seed", args.seed.to_string()),
            ("noise", args.noise.to_string()),
        ],
    )
}

