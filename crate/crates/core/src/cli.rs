//! Command-line front end.
//!
//! Every flag may also come from a flat `key = value` file given with
//! `--config PATH`; flags on the command line win. Exit status is 0 on
//! success, 1 for bad arguments or I/O problems and 2 when a computation
//! fails numerically.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{invalid, Result};
use crate::harness::{build_example, render_reports, run_convergence_study, Example, ExperimentConfig, Format};
use crate::par::Execution;
use crate::quadrature::WeightSet;
use crate::spatial::SpectralOperator;
use crate::stepper::{run, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fracfk", version, about = "Corrected BDF convolution quadrature for the tempered fractional diffusion equation")]
#[command(args_override_self = true)]
struct Cli {
    /// Read default flag values from a `key = value` file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scheme on one example and print the final state.
    Solve(SolveArgs),
    /// Convergence table over orders and step counts.
    Study(StudyArgs),
    /// Dump the convolution weights b_j and q_j as CSV.
    Weights(WeightsArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, default_value = "a")]
    example: Example,
    #[arg(long, default_value = "corrected")]
    scheme: Scheme,
    #[arg(long, default_value_t = 2)]
    order: usize,
    #[arg(long, default_value_t = 80)]
    nsteps: usize,
    #[arg(long, default_value_t = 1.7)]
    alpha: f64,
    #[arg(long, default_value_t = 0.3)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 60)]
    mgrid: usize,
    /// Write `x,initial,final` rows to this file.
    #[arg(long, value_name = "PATH")]
    dump_solution: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StudyArgs {
    #[arg(long, default_value = "a")]
    example: Example,
    #[arg(long, default_value = "corrected")]
    scheme: Scheme,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    orders: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "40,80,160,320")]
    nsteps: Vec<usize>,
    /// Space orders; paired entry by entry with `--gamma`.
    #[arg(long, value_delimiter = ',', default_value = "1.7,1.3")]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.7")]
    gamma: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    tfinal: f64,
    #[arg(long, default_value_t = 60)]
    mgrid: usize,
    #[arg(long, default_value = "csv")]
    format: Format,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Run grid cells one after another on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    #[arg(long)]
    order: usize,
    #[arg(long)]
    gamma: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long)]
    tau: f64,
    /// Largest index j.
    #[arg(long)]
    count: usize,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit status.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
            } else {
                let _ = write!(stdout, "{text}");
            }
            return code;
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

/// Replaces `--config PATH` by the flags it contains, placed right after
/// the subcommand so that later command-line flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            let p = it.next().ok_or_else(|| invalid("--config needs a path"))?;
            path = Some(PathBuf::from(p));
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let injected = config_flags(&path)?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|i| i + 2)
        .ok_or_else(|| invalid("--config given without a subcommand"))?;
    rest.splice(sub..sub, injected);
    Ok(rest)
}

/// Reads `key = value` lines; `#` starts a comment. Boolean flags take
/// `true` or `false`.
pub fn config_flags(path: &Path) -> Result<Vec<OsString>> {
    let text = fs::read_to_string(path)
        .map_err(|e| invalid(format!("cannot read config {}: {e}", path.display())))?;
    let mut flags = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if key.is_empty() || key == "config" {
            return Err(invalid(format!("{}:{}: bad key", path.display(), no + 1)));
        }
        match value {
            "true" => flags.push(format!("--{key}").into()),
            "false" => {}
            v => {
                flags.push(format!("--{key}").into());
                flags.push(v.into());
            }
        }
    }
    Ok(flags)
}

fn execute(cmd: Command, stdout: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Solve(a) => solve(a, stdout),
        Command::Study(a) => study(a, stdout),
        Command::Weights(a) => weights(a, stdout),
    }
}

fn solve(a: SolveArgs, stdout: &mut dyn Write) -> Result<()> {
    let op = SpectralOperator::chebyshev(a.mgrid, a.alpha)?;
    let problem = build_example(a.example, &op, a.gamma, a.sigma, a.tfinal);
    let tr = run(&problem, &op, a.scheme, a.order, a.nsteps)?;
    let last = tr.last();
    let norm = last.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    writeln!(
        stdout,
        "example={} scheme={} k={} N={} tau={:e} T={:e} max|G|={:.10e}",
        a.example,
        a.scheme.name(),
        a.order,
        a.nsteps,
        tr.tau,
        a.tfinal,
        norm
    )?;
    if let Some(path) = a.dump_solution {
        let mut text = String::from("x,initial,final\n");
        for ((x, g0), g) in op.nodes().iter().zip(&problem.g0).zip(last) {
            text.push_str(&format!("{x:e},{g0:e},{g:e}\n"));
        }
        fs::write(&path, text)?;
    }
    Ok(())
}

fn study(a: StudyArgs, stdout: &mut dyn Write) -> Result<()> {
    if a.alpha.len() != a.gamma.len() {
        return Err(invalid(format!(
            "--alpha and --gamma must have the same number of entries ({} vs {})",
            a.alpha.len(),
            a.gamma.len()
        )));
    }
    let exec = if a.sequential { Execution::Sequential } else { Execution::Parallel };
    let mut reports = Vec::new();
    for (&alpha, &gamma) in a.alpha.iter().zip(&a.gamma) {
        let config = ExperimentConfig {
            example: a.example,
            scheme: a.scheme,
            alpha,
            gamma,
            sigma: a.sigma,
            t_final: a.tfinal,
            orders: a.orders.clone(),
            steps: a.nsteps.clone(),
            m_grid: a.mgrid,
            format: a.format,
            exec,
        };
        reports.push(run_convergence_study(&config)?);
    }
    let text = render_reports(&reports, a.format);
    match a.out {
        Some(path) => fs::write(path, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn weights(a: WeightsArgs, stdout: &mut dyn Write) -> Result<()> {
    let w = WeightSet::new(a.order, a.gamma, a.sigma, a.tau, a.count)?;
    match a.out {
        Some(path) => w.write_csv(fs::File::create(path)?),
        None => w.write_csv(stdout),
    }
}
