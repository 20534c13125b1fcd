//! Self-comparison convergence studies on the three model problems.
//!
//! The error at step count `N` is `max_i |G^N(x_i, T) - G^{2N}(x_i, T)|`
//! on one fixed spatial grid, and the rate at `N` is
//! `log2(e_{N/2} / e_N)`.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::par::{self, Execution};
use crate::quadrature::MAX_ORDER;
use crate::spatial::SpectralOperator;
use crate::stepper::{run, ProblemSpec, Scheme};

/// Model problems on (-1, 1).
///
/// * `A`: `G0 = sqrt(1 - x^2)`, `f = 0`
/// * `B`: `G0 = 0`, `f = (t + 1)^5 (1 + chi(x))`
/// * `C`: `G0 = sqrt(1 - x^2)`, `f = cos(t) (1 + chi(x))`
///
/// with `chi` the indicator of the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Example {
    A,
    B,
    C,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::A => "a",
            Example::B => "b",
            Example::C => "c",
        }
    }
}

impl fmt::Display for Example {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Example {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Example::A),
            "b" => Ok(Example::B),
            "c" => Ok(Example::C),
            other => Err(invalid(format!("unknown example '{other}' (expected a, b or c)"))),
        }
    }
}

/// Indicator of the open interval (0, 1).
pub fn indicator(x: f64) -> f64 {
    if x > 0.0 && x < 1.0 {
        1.0
    } else {
        0.0
    }
}

/// Number of time derivatives of `f` at `t = 0` supplied by
/// [`build_example`]; enough for every order up to [`MAX_ORDER`].
pub const DERIVATIVES: usize = MAX_ORDER;

/// Samples the model problem on the nodes of `op`.
pub fn build_example(example: Example, op: &SpectralOperator, gamma: f64, sigma: f64, t_final: f64) -> ProblemSpec {
    let nodes = op.nodes();
    let space: Vec<f64> = nodes.iter().map(|&x| 1.0 + indicator(x)).collect();
    let bump: Vec<f64> = nodes.iter().map(|x| (1.0 - x * x).max(0.0).sqrt()).collect();
    let zero = vec![0.0; nodes.len()];
    let scaled = |c: f64| -> Vec<f64> { space.iter().map(|s| c * s).collect() };
    let (g0, derivs, forcing): (Vec<f64>, Vec<Vec<f64>>, Arc<crate::stepper::ForcingFn>) = match example {
        Example::A => (bump, vec![zero; DERIVATIVES], Arc::new(|_, _| 0.0)),
        Example::B => {
            // d^l/dt^l (t+1)^5 at 0 is 5!/(5-l)!
            let mut falling = 1.0;
            let derivs = (0..DERIVATIVES)
                .map(|l| {
                    let d = if l <= 5 { falling } else { 0.0 };
                    falling *= (5 - l.min(5)) as f64;
                    scaled(d)
                })
                .collect();
            let s = space.clone();
            (zero, derivs, Arc::new(move |i, t: f64| (t + 1.0).powi(5) * s[i]))
        }
        Example::C => {
            let derivs = (0..DERIVATIVES).map(|l| scaled([1.0, 0.0, -1.0, 0.0][l % 4])).collect();
            let s = space.clone();
            (bump, derivs, Arc::new(move |i, t: f64| t.cos() * s[i]))
        }
    };
    ProblemSpec {
        alpha: op.alpha(),
        gamma,
        sigma,
        t_final,
        g0,
        forcing,
        f_derivs0: derivs,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(invalid(format!("unknown format '{other}' (expected csv or md)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub example: Example,
    pub scheme: Scheme,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub t_final: f64,
    pub orders: Vec<usize>,
    pub steps: Vec<usize>,
    pub m_grid: usize,
    pub format: Format,
    pub exec: Execution,
}

impl ExperimentConfig {
    /// Grid of the published tables: orders 2..=6, `N = 40..320`,
    /// `sigma = 0.5`, `T = 1`, `M = 60`.
    pub fn paper_grid(example: Example, scheme: Scheme, alpha: f64, gamma: f64) -> Self {
        ExperimentConfig {
            example,
            scheme,
            alpha,
            gamma,
            sigma: 0.5,
            t_final: 1.0,
            orders: vec![2, 3, 4, 5, 6],
            steps: vec![40, 80, 160, 320],
            m_grid: 60,
            format: Format::Csv,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.steps.is_empty() {
            return Err(invalid("orders and step counts must be non-empty"));
        }
        if let Some(&k) = self.orders.iter().find(|&&k| k == 0 || k > MAX_ORDER) {
            return Err(invalid(format!("order {k} outside 1..={MAX_ORDER}")));
        }
        let max_k = *self.orders.iter().max().unwrap();
        if self.steps[0] < max_k {
            return Err(invalid(format!(
                "every step count must be at least the largest order {max_k}, got {}",
                self.steps[0]
            )));
        }
        for w in self.steps.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(invalid(format!(
                    "step counts must double from one entry to the next, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// One `(k, N)` cell of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub k: usize,
    pub n: usize,
    /// `|G^N - G^{2N}|_inf` at `T`; NaN if a run failed.
    pub error: f64,
    /// `log2(e_{N/2} / e_N)`; `None` for the first step count.
    pub rate: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ConvergenceReport {
    pub fn rows_for(&self, k: usize) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.k == k)
    }

    pub fn error(&self, k: usize, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.k == k && r.n == n).map(|r| r.error)
    }

    /// Rate of the last pair of step counts.
    pub fn last_rate(&self, k: usize) -> Option<f64> {
        self.rows_for(k).filter_map(|r| r.rate).last()
    }

    /// Mean of all pair rates of order `k`, as in the published tables.
    pub fn mean_rate(&self, k: usize) -> Option<f64> {
        let rates: Vec<f64> = self.rows_for(k).filter_map(|r| r.rate).collect();
        if rates.is_empty() {
            None
        } else {
            Some(rates.iter().sum::<f64>() / rates.len() as f64)
        }
    }
}

/// `log2(coarse / fine)`.
pub fn rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).ln() / std::f64::consts::LN_2
}

pub fn run_convergence_study(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let op = SpectralOperator::chebyshev(config.m_grid, config.alpha)?;
    let problem = build_example(config.example, &op, config.gamma, config.sigma, config.t_final);
    problem.validate(&op)?;

    let mut counts = config.steps.clone();
    counts.push(2 * counts.last().unwrap());
    let jobs: Vec<(usize, usize)> = config
        .orders
        .iter()
        .flat_map(|&k| counts.iter().map(move |&n| (k, n)))
        .collect();
    let finals = par::map(config.exec, &jobs, |&(k, n)| {
        run(&problem, &op, config.scheme, k, n)
            .map(|tr| tr.last().to_vec())
            .map_err(|e| e.to_string())
    });

    Ok(ConvergenceReport {
        config: config.clone(),
        rows: assemble(&config.orders, &config.steps, &finals),
    })
}

type CellResult = std::result::Result<Vec<f64>, String>;

/// Turns final-time vectors, laid out order by order over
/// `steps ++ [2 * last]`, into report rows.
fn assemble(orders: &[usize], steps: &[usize], finals: &[CellResult]) -> Vec<ReportRow> {
    let stride = steps.len() + 1;
    let mut rows = Vec::new();
    for (oi, &k) in orders.iter().enumerate() {
        let base = oi * stride;
        let mut prev: Option<f64> = None;
        for (ni, &n) in steps.iter().enumerate() {
            let (error, diagnostic) = match (&finals[base + ni], &finals[base + ni + 1]) {
                (Ok(a), Ok(b)) => (max_diff(a, b), None),
                (Err(e), _) => (f64::NAN, Some(format!("k={k}, N={n}: {e}"))),
                (_, Err(e)) => (f64::NAN, Some(format!("k={k}, N={}: {e}", 2 * n))),
            };
            rows.push(ReportRow {
                k,
                n,
                error,
                rate: prev.map(|p| rate(p, error)),
                diagnostic,
            });
            prev = Some(error);
        }
    }
    rows
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Scientific notation with five significant digits and a two-digit
/// exponent, e.g. `8.7495e-06`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mant, exp) = s.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

fn fixed4(x: Option<f64>) -> String {
    x.map_or_else(String::new, |r| format!("{r:.4}"))
}

pub const CSV_HEADER: &str = "example,scheme,k,N,error,rate,alpha,gamma";

/// Renders several reports into one table.
pub fn render_reports(reports: &[ConvergenceReport], format: Format) -> String {
    let mut out = String::new();
    match format {
        Format::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for rep in reports {
                let c = &rep.config;
                for r in &rep.rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{}",
                        c.example,
                        c.scheme.name(),
                        r.k,
                        r.n,
                        sci(r.error),
                        r.rate.map_or_else(String::new, |x| format!("{x:.4}")),
                        c.alpha,
                        c.gamma
                    );
                }
            }
        }
        Format::Markdown => {
            for (i, rep) in reports.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                render_markdown(&mut out, rep);
            }
        }
    }
    out
}

pub fn render_report(report: &ConvergenceReport, format: Format) -> String {
    render_reports(std::slice::from_ref(report), format)
}

fn render_markdown(out: &mut String, rep: &ConvergenceReport) {
    let c = &rep.config;
    let _ = writeln!(
        out,
        "Example ({}), {} scheme, (alpha, gamma) = ({}, {}), sigma = {}, T = {}, M = {}\n",
        c.example,
        c.scheme.name(),
        c.alpha,
        c.gamma,
        c.sigma,
        c.t_final,
        c.m_grid
    );
    out.push_str("| k |");
    for n in &c.steps {
        let _ = write!(out, " {n} |");
    }
    out.push_str(" Rate (last) | Rate (mean) |\n|---|");
    for _ in &c.steps {
        out.push_str("---|");
    }
    out.push_str("---|---|\n");
    for &k in &c.orders {
        if rep.rows_for(k).next().is_none() {
            continue;
        }
        let _ = write!(out, "| {k} |");
        for r in rep.rows_for(k) {
            let _ = write!(out, " {} |", sci(r.error));
        }
        let _ = writeln!(out, " {} | {} |", fixed4(rep.last_rate(k)), fixed4(rep.mean_rate(k)));
    }
    let notes: Vec<&str> = rep.rows.iter().filter_map(|r| r.diagnostic.as_deref()).collect();
    for note in notes {
        let _ = writeln!(out, "\nfailed cell: {note}");
    }
}
