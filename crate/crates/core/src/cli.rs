//! Command-line front end. Exit codes: 0 on success, 1 when a check fails or
//! a run breaks down, 2 on usage errors.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::{load_config, resolve, ResolvedConfig};
use crate::error::{Error, Result};
use crate::lab::{corner_for, run_corner_experiment, run_refinement_study, ConvergenceReport, RateBand};
use crate::normal_mode::{analyze, AnalysisOptions};
use crate::sat::{assemble_1d, BoundaryKind};
use crate::sbp::{build_sbp_d2, verify_sbp_properties};
use crate::spectral::{diagonalize_semidisc, spectrum_rows, write_spectrum_csv};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wavelab", version, about = "SBP-SAT wave equation laboratory", arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Verify the SBP properties of one operator.
    OperatorCheck(OperatorArgs),
    /// Grid refinement study against the manufactured solution.
    Converge(StudyArgs),
    /// Refinement study with erroneous data next to the west corners.
    Corner(CornerArgs),
    /// Normal-mode analysis of a boundary closure.
    Analyze(AnalyzeArgs),
    /// Eigenvalues of the one-dimensional semi-discrete operator.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Debug, Args)]
struct OperatorArgs {
    #[arg(long, default_value_t = 4)]
    order: usize,
    #[arg(long, default_value_t = 61)]
    n: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct StudyArgs {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<String>,
    #[arg(long)]
    order: Option<String>,
    /// Boundary kind on every side.
    #[arg(long)]
    bc: Option<String>,
    #[arg(long)]
    bc_x: Option<String>,
    #[arg(long)]
    bc_y: Option<String>,
    /// Comma-separated grid sizes, each halving h (default 41,81,161,321).
    #[arg(long)]
    levels: Option<String>,
    /// Final time (default 2).
    #[arg(long)]
    tf: Option<String>,
    /// Time step over grid spacing (default 0.1).
    #[arg(long)]
    cfl: Option<String>,
    /// Dirichlet penalty over its stability threshold (default 1.2).
    #[arg(long)]
    penalty_factor: Option<String>,
    /// `smooth` (default) or `high-frequency`.
    #[arg(long)]
    solution: Option<String>,
    /// `stage-consistent` (default) or `stage-time`.
    #[arg(long)]
    timing: Option<String>,
    /// `parallel` (default) or `sequential` scheduling of levels.
    #[arg(long)]
    exec: Option<String>,
    /// Fail unless the headline rate is at least this.
    #[arg(long)]
    expect_min: Option<f64>,
    /// Fail unless the headline rate is at most this.
    #[arg(long)]
    expect_max: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

impl StudyArgs {
    fn flags(&self) -> Vec<(String, String)> {
        [
            ("dim", &self.dim),
            ("order", &self.order),
            ("bc", &self.bc),
            ("bc-x", &self.bc_x),
            ("bc-y", &self.bc_y),
            ("levels", &self.levels),
            ("tf", &self.tf),
            ("cfl", &self.cfl),
            ("penalty-factor", &self.penalty_factor),
            ("solution", &self.solution),
            ("timing", &self.timing),
            ("exec", &self.exec),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
        .collect()
    }

    fn resolve(&self) -> Result<ResolvedConfig> {
        let file = self.config.as_deref().map(load_config).transpose()?;
        resolve(file.as_ref(), &self.flags())
    }

    fn band(&self) -> Option<RateBand> {
        match (self.expect_min, self.expect_max) {
            (None, None) => None,
            (min, max) => Some(RateBand { min: min.unwrap_or(f64::NEG_INFINITY), max: max.unwrap_or(f64::INFINITY) }),
        }
    }
}

#[derive(Debug, Args)]
struct CornerArgs {
    #[command(flatten)]
    study: StudyArgs,
    /// Perturbation constant; calibrated from the closure when absent.
    #[arg(long)]
    c_p: Option<f64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = "dirichlet")]
    bc: BoundaryKind,
    #[arg(long, default_value_t = 1.2)]
    penalty_factor: f64,
    /// Grid size used to extract the closure.
    #[arg(long, default_value_t = 41)]
    n: usize,
    #[arg(long, default_value_t = 4096)]
    scan_points: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report, or the imaginary-axis scan as CSV.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value = "neumann")]
    bc: BoundaryKind,
    #[arg(long, default_value_t = 41)]
    n: usize,
    #[arg(long, default_value_t = 1.2)]
    penalty_factor: f64,
    #[command(flatten)]
    output: OutputArgs,
}

/// Parses `args` (program name first), runs one subcommand and returns the
/// exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{text}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{text}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, stdout, stderr) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::Config(_) | Error::GridTooSmall { .. } | Error::UnsupportedOrder(_) | Error::PenaltyBelowThreshold { .. } => EXIT_USAGE,
                _ => EXIT_CHECK_FAILED,
            }
        }
    }
}

fn emit(output: &OutputArgs, stdout: &mut dyn Write, body: &[u8]) -> Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, body).map_err(|e| Error::Config(format!("{}: {e}", path.display()))),
        None => Ok(stdout.write_all(body)?),
    }
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value)?;
    text.push(b'\n');
    Ok(text)
}

#[derive(Serialize)]
struct StudyOutput<'a> {
    report: &'a ConvergenceReport,
    headline: Option<f64>,
    passed: Option<bool>,
    levels: &'a [usize],
    provenance: &'a std::collections::BTreeMap<String, crate::config::Provenance>,
}

fn dispatch(command: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<bool> {
    match command {
        Command::OperatorCheck(a) => {
            let op = build_sbp_d2(a.order, a.n, 1.0 / (a.n - 1).max(1) as f64)?;
            let report = verify_sbp_properties(&op);
            let body = match a.output.format {
                Format::Json => json(&report)?,
                Format::Csv => {
                    let mut s = String::from("degree,interior_residual,boundary_residual\n");
                    for r in &report.exactness {
                        s += &format!("{},{:.16e},{:.16e}\n", r.degree, r.interior_residual, r.boundary_residual);
                    }
                    s.into_bytes()
                }
            };
            emit(&a.output, stdout, &body)?;
            for f in &report.failures {
                let _ = writeln!(stderr, "failed: {f}");
            }
            Ok(report.passed())
        }
        Command::Converge(a) => study(&a, None, false, stdout, stderr),
        Command::Corner(a) => study(&a.study, a.c_p, true, stdout, stderr),
        Command::Analyze(a) => {
            let cfg = resolve(None, &[])?;
            let opts = AnalysisOptions { scan_points: a.scan_points, exec: cfg.exec, ..Default::default() };
            let report = analyze(a.order, a.bc, a.penalty_factor, a.n, &opts)?;
            let body = match a.format {
                Format::Json => json(&report)?,
                Format::Csv => {
                    let mut s = String::from("xi,det_abs,rel_sigma_min\n");
                    for p in &report.det_scan {
                        s += &format!("{:.16e},{:.16e},{:.16e}\n", p.xi, p.det_abs, p.rel_sigma_min);
                    }
                    s.into_bytes()
                }
            };
            emit(&OutputArgs { out: a.out, format: a.format }, stdout, &body)?;
            if report.flagged {
                let _ = writeln!(stderr, "closure flagged: no finite origin exponent up to the cap");
            }
            Ok(!report.flagged)
        }
        Command::Spectrum(a) => {
            let op = build_sbp_d2(a.order, a.n, 1.0 / (a.n - 1).max(1) as f64)?;
            let sd = assemble_1d(&op, a.bc, a.penalty_factor)?;
            let rows = spectrum_rows(&diagonalize_semidisc(&sd)?, a.bc);
            let body = match a.output.format {
                Format::Json => json(&rows)?,
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_spectrum_csv(&mut buf, &rows)?;
                    buf
                }
            };
            emit(&a.output, stdout, &body)?;
            Ok(true)
        }
    }
}

fn study(a: &StudyArgs, c_p: Option<f64>, corner: bool, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<bool> {
    let mut cfg = a.resolve()?;
    let report = if corner {
        cfg.sim.dim = 2;
        let mut c = corner_for(&cfg.sim)?;
        if let Some(v) = c_p {
            c.c_p = v;
        }
        cfg.sim.corner = Some(c);
        run_corner_experiment(&cfg.sim, &cfg.levels, cfg.exec)?
    } else {
        run_refinement_study(&cfg.sim, &cfg.levels, cfg.exec)?
    };
    let report = match a.band() {
        Some(b) => report.with_band(b),
        None => report,
    };
    let body = match a.output.format {
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            buf
        }
        Format::Json => json(&StudyOutput {
            report: &report,
            headline: report.headline(),
            passed: report.passed(),
            levels: &cfg.levels,
            provenance: &cfg.provenance,
        })?,
    };
    emit(&a.output, stdout, &body)?;
    if let Some(q) = report.headline() {
        let _ = writeln!(stderr, "{}: headline rate {q:.4}", report.experiment);
    }
    Ok(report.passed().unwrap_or(true))
}
