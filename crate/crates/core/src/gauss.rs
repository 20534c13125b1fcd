//! Gauss–Legendre rules and an adaptive bisection integrator.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on [-1, 1],
/// found by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

const RULE_POINTS: usize = 20;

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(RULE_POINTS))
}

/// Fixed 20-point Gauss–Legendre rule on `[a, b]`.
pub fn fixed<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(mid + half * xi))
        .sum::<f64>()
        * half
}

/// Adaptive bisection with the 20-point rule.
///
/// Panels are split until the rule on the panel and on its two halves
/// agree to `rel_tol` times the magnitude of the integral (or `abs_tol`);
/// the refined value is kept. `breaks` seeds the initial partition.
pub fn adaptive<F: Fn(f64) -> f64>(
    f: &F,
    breaks: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    const MAX_PANELS: usize = 20_000;

    let mut stack: Vec<(f64, f64, f64)> = breaks
        .windows(2)
        .filter(|p| p[1] > p[0])
        .map(|p| (p[0], p[1], fixed(f, p[0], p[1])))
        .collect();
    let scale: f64 = stack.iter().map(|p| p.2.abs()).sum();
    let mut total = 0.0f64;
    let mut comp = 0.0;
    let mut panels = 0usize;
    let mut unresolved = false;
    while let Some((a, b, whole)) = stack.pop() {
        panels += 1;
        if panels > MAX_PANELS {
            return Err(Error::Quadrature(format!(
                "adaptive rule exceeded {MAX_PANELS} panels"
            )));
        }
        let m = 0.5 * (a + b);
        let left = fixed(f, a, m);
        let right = fixed(f, m, b);
        let refined = left + right;
        let tol = (rel_tol * scale.max(total.abs())).max(abs_tol);
        let exhausted = b - a <= 8.0 * f64::EPSILON * a.abs().max(b.abs());
        if (refined - whole).abs() <= tol || exhausted {
            unresolved |= exhausted && (refined - whole).abs() > tol;
            // Neumaier summation
            let t = total + refined;
            if total.abs() >= refined.abs() {
                comp += (total - t) + refined;
            } else {
                comp += (refined - t) + total;
            }
            total = t;
        } else {
            stack.push((a, m, left));
            stack.push((m, b, right));
        }
    }
    if unresolved || !total.is_finite() {
        return Err(Error::Quadrature("integrand could not be resolved".into()));
    }
    Ok(total + comp)
}
