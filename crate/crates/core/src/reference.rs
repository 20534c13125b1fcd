//! Reference solutions: the two-parameter Mittag-Leffler function on the
//! negative real axis, exact modal solutions, and a fine-step oracle.

use std::f64::consts::PI;


use crate::error::{invalid, Error, Result};
use crate::gauss;
use crate::par::{self, Execution};
use crate::quadrature::{correction_table, WeightSet};
use crate::spatial::SpectralOperator;
use crate::stepper::{ProblemSpec, Scheme};

/// Step count of [`fine_step_oracle`].
pub const FINE_STEPS: usize = 20_480;

const SERIES_RADIUS: f64 = 1.0;
const SERIES_MAX_TERMS: usize = 500;
const ASYMPTOTIC_MAX_TERMS: usize = 60;
const INTEGRAL_RTOL: f64 = 1e-13;

/// `1 / Gamma(x)`, exactly zero at the poles.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        0.0
    } else {
        1.0 / libm::tgamma(x)
    }
}

/// `E_{gamma,beta}(z) = sum_m z^m / Gamma(m gamma + beta)` for
/// `0 < gamma <= 1`, `beta > 0`, `z <= 0`.
///
/// Small arguments use the power series, large ones the algebraic
/// asymptotic expansion when its first omitted terms are below rounding,
/// and everything in between the integral representation of Gorenflo,
/// Loutchko and Luchko.
pub fn mittag_leffler(gamma: f64, beta: f64, z: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid(format!("Mittag-Leffler order must lie in (0,1], got {gamma}")));
    }
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("Mittag-Leffler beta must be positive, got {beta}")));
    }
    if !(z <= 0.0) || !z.is_finite() {
        return Err(invalid(format!("Mittag-Leffler argument must be finite and <= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(rgamma(beta));
    }
    if gamma == 1.0 {
        if beta == 1.0 {
            return Ok(z.exp());
        }
        if z >= -5.0 {
            return Ok(ml_series(gamma, beta, z));
        }
        return Err(invalid(format!(
            "E_(1,{beta}) is only supported for z >= -5, got {z}"
        )));
    }
    if z >= -SERIES_RADIUS {
        return Ok(ml_series(gamma, beta, z));
    }
    if let Some(v) = ml_asymptotic(gamma, beta, z) {
        return Ok(v);
    }
    if beta >= 1.0 + gamma {
        let lower = mittag_leffler(gamma, beta - gamma, z)?;
        return Ok((lower - rgamma(beta - gamma)) / z);
    }
    ml_integral(gamma, beta, z)
}

/// Power series with compensated summation. Accurate while the largest
/// term stays moderate, i.e. for small `|z|` unless `gamma` is near 1.
pub fn ml_series(gamma: f64, beta: f64, z: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut zp = 1.0f64;
    for m in 0..SERIES_MAX_TERMS {
        let arg = m as f64 * gamma + beta;
        let term = zp * rgamma(arg);
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        if arg > 2.0 && term.abs() <= 1e-17 * (sum + comp).abs() {
            break;
        }
        zp *= z;
        if zp == 0.0 {
            break;
        }
    }
    sum + comp
}

/// `-sum_{m>=1} z^{-m} / Gamma(beta - m gamma)`, truncated once the next
/// three terms are below `1e-16` of the sum. `None` if that never happens
/// before the terms start to grow.
pub fn ml_asymptotic(gamma: f64, beta: f64, z: f64) -> Option<f64> {
    let terms: Vec<f64> = (1..=ASYMPTOTIC_MAX_TERMS + 3)
        .map(|m| -z.powi(-(m as i32)) * rgamma(beta - m as f64 * gamma))
        .collect();
    let mut sum = 0.0f64;
    for p in 0..ASYMPTOTIC_MAX_TERMS {
        sum += terms[p];
        let tail = terms[p + 1..p + 4].iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if sum != 0.0 && tail <= 1e-16 * sum.abs() {
            return Some(sum);
        }
    }
    None
}

/// Integral representation on the negative axis, valid for
/// `0 < gamma < 1`, `0 < beta < 1 + gamma`:
///
/// ```text
/// E(-x) = 1/(gamma pi) int_0^inf r^{(1-beta)/gamma} exp(-r^{1/gamma})
///         (r sin(pi(1-beta)) + x sin(pi(1-beta+gamma)))
///         / (r^2 + 2 r x cos(pi gamma) + x^2) dr
/// ```
pub fn ml_integral(gamma: f64, beta: f64, z: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) || !(beta > 0.0 && beta < 1.0 + gamma) || !(z < 0.0) {
        return Err(invalid(format!(
            "integral representation needs 0<gamma<1, 0<beta<1+gamma, z<0 (got {gamma}, {beta}, {z})"
        )));
    }
    let x = -z;
    let s1 = sin_pi(beta);
    let s2 = sin_pi(beta - gamma);
    let c = (PI * gamma).cos();
    let p = (1.0 - beta) / gamma;
    let inv_g = 1.0 / gamma;
    let kernel = |r: f64| {
        if r == 0.0 {
            return 0.0;
        }
        let den = r * r + 2.0 * r * x * c + x * x;
        r.powf(p) * (-r.powf(inv_g)).exp() * (r * s1 + x * s2) / den
    };
    let upper = 750f64.powf(gamma);
    let centre = x * (-c).max(0.0);
    let width = x * (PI * gamma).sin();
    let mut breaks = vec![0.0, upper];
    for b in [centre - width, centre, centre + width, 1.0] {
        if b > 0.0 && b < upper {
            breaks.push(b);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let val = gauss::adaptive(&kernel, &breaks, INTEGRAL_RTOL, 0.0)?;
    Ok(val / (gamma * PI))
}

/// `sin(pi u)`, exactly zero at integers.
fn sin_pi(u: f64) -> f64 {
    let r = u.rem_euclid(2.0);
    let (r, sign) = if r >= 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

/// Modal coefficient `v e^{-sigma t} E_{gamma,1}(-lambda t^gamma)` of the
/// homogeneous solution.
pub fn eigenmode_solution(lambda_frac: f64, gamma: f64, sigma: f64, t: f64, v_coef: f64) -> Result<f64> {
    check_mode(lambda_frac, sigma, t)?;
    if t == 0.0 {
        return Ok(v_coef);
    }
    let e = mittag_leffler(gamma, 1.0, -lambda_frac * t.powf(gamma))?;
    Ok(v_coef * (-sigma * t).exp() * e)
}

/// Modal coefficient of the solution with initial coefficient `v_coef`
/// and forcing coefficient `f_coef(s)`:
///
/// ```text
/// e^{-sigma t} [ v E_{gamma,1}(-lambda t^gamma)
///   + int_0^t (t-s)^{gamma-1} E_{gamma,gamma}(-lambda (t-s)^gamma) e^{sigma s} f(s) ds ]
/// ```
///
/// The kernel singularity is removed by the substitution `w = (t-s)^gamma`.
pub fn inhomogeneous_eigenmode_solution<F>(
    lambda_frac: f64,
    gamma: f64,
    sigma: f64,
    t: f64,
    v_coef: f64,
    f_coef: F,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    check_mode(lambda_frac, sigma, t)?;
    let homogeneous = eigenmode_solution(lambda_frac, gamma, sigma, t, v_coef)?;
    if t == 0.0 {
        return Ok(homogeneous);
    }
    let inv_g = 1.0 / gamma;
    let failed = std::cell::Cell::new(None);
    let integrand = |w: f64| {
        let u = w.powf(inv_g).min(t);
        let s = t - u;
        match mittag_leffler(gamma, gamma, -lambda_frac * w) {
            Ok(e) => e * (sigma * s).exp() * f_coef(s),
            Err(err) => {
                failed.set(Some(err.to_string()));
                f64::NAN
            }
        }
    };
    let upper = t.powf(gamma);
    let integral = gauss::adaptive(&integrand, &[0.0, upper], 1e-12, 0.0);
    if let Some(msg) = failed.take() {
        return Err(Error::Quadrature(msg));
    }
    let integral = integral?;
    Ok(homogeneous + (-sigma * t).exp() * integral / gamma)
}

fn check_mode(lambda_frac: f64, sigma: f64, t: f64) -> Result<()> {
    if !(lambda_frac >= 0.0 && lambda_frac.is_finite()) {
        return Err(invalid(format!("eigenvalue must be non-negative, got {lambda_frac}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("tempering must be non-negative, got {sigma}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be non-negative, got {t}")));
    }
    Ok(())
}

/// Corrected BDF2 with [`FINE_STEPS`] steps, evaluated at time `t`.
pub fn fine_step_oracle(problem: &ProblemSpec, op: &SpectralOperator, t: f64) -> Result<Vec<f64>> {
    modal_final_value(problem, op, Scheme::Corrected, 2, FINE_STEPS, t, Execution::default())
}

/// Final value at time `t` of the BDF`k` scheme with `n` steps, computed
/// mode by mode in the eigenbasis of `op`.
///
/// Mathematically the same recursion as [`crate::stepper::run`] but each
/// mode is a scalar recurrence, so the cost is `O(n^2)` per mode instead
/// of `O(n^2 M)` per node. Modes are independent jobs. Components outside
/// the span of the retained eigenvectors (truncated sine operator) evolve
/// with eigenvalue zero.
pub fn modal_final_value(
    problem: &ProblemSpec,
    op: &SpectralOperator,
    scheme: Scheme,
    k: usize,
    n: usize,
    t: f64,
    exec: Execution,
) -> Result<Vec<f64>> {
    let mut p = problem.clone();
    p.t_final = t;
    p.validate(op)?;
    let table = correction_table(k)?;
    if n < k {
        return Err(invalid(format!("need at least {k} steps for order {k}, got {n}")));
    }
    let n_derivs = if scheme == Scheme::Corrected { k - 1 } else { 0 };
    if problem.f_derivs0.len() < n_derivs {
        return Err(Error::MissingDerivatives {
            order: k,
            needed: k - 2,
            supplied: problem.f_derivs0.len(),
        });
    }
    let dim = op.dim();
    let tau = t / n as f64;
    let weights = WeightSet::new(k, p.gamma, p.sigma, tau, n)?;

    // Split nodal data into retained modes and the null-space remainder.
    let split = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let c = op.to_modal(v);
        let back = op.from_modal(&c);
        let rest = v.iter().zip(&back).map(|(a, b)| a - b).collect();
        (c, rest)
    };
    let nm = op.n_modes();
    let n_series = nm + dim;
    let lambdas: Vec<f64> = op.eigenvalues().iter().copied().chain(std::iter::repeat_n(0.0, dim)).collect();

    let join = |(c, r): (Vec<f64>, Vec<f64>)| -> Vec<f64> { c.into_iter().chain(r).collect() };
    let g0 = join(split(&p.g0));
    let derivs: Vec<Vec<f64>> = p.f_derivs0.iter().take(n_derivs).map(|d| join(split(d))).collect();
    let times: Vec<usize> = (1..=n).collect();
    let forcing: Vec<Vec<f64>> = par::map(exec, &times, |&s| join(split(&p.forcing_at(s as f64 * tau))));

    let data_scale = g0
        .iter()
        .chain(derivs.iter().flatten())
        .chain(forcing.iter().flatten())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let active: Vec<usize> = (0..n_series)
        .filter(|&j| {
            j < nm || {
                let mut mx = g0[j].abs();
                for d in &derivs {
                    mx = mx.max(d[j].abs());
                }
                for f in &forcing {
                    mx = mx.max(f[j].abs());
                }
                mx > 1e-15 * data_scale
            }
        })
        .collect();

    let scale = weights.scale();
    let q = &weights.q;
    let qrev: Vec<f64> = q.iter().rev().copied().collect();
    let decay: Vec<f64> = (0..=n).map(|s| (-p.sigma * s as f64 * tau).exp()).collect();
    let finals = par::map(exec, &active, |&j| {
        let lam = lambdas[j];
        let c0 = g0[j];
        let denom = scale * q[0] + lam;
        let mut w = vec![0.0; n + 1];
        for s in 1..=n {
            let hist = dot(&qrev[n - s..n], &w[..s]);
            let mut rhs = forcing[s - 1][j] - decay[s] * lam * c0 - scale * hist;
            if scheme == Scheme::Corrected && s < k {
                rhs += -table.a[s - 1] * decay[s] * lam * c0 + table.b[s - 1] * derivs[0][j];
                for (l, row) in table.d.iter().enumerate() {
                    rhs += row[s - 1] * tau.powi(l as i32 + 1) * derivs[l + 1][j];
                }
            }
            w[s] = rhs / denom;
        }
        w[n] + decay[n] * c0
    });

    let mut coefs = vec![0.0; n_series];
    for (&j, v) in active.iter().zip(&finals) {
        coefs[j] = *v;
    }
    let mut out = op.from_modal(&coefs[..nm]);
    for (o, r) in out.iter_mut().zip(&coefs[nm..]) {
        *o += r;
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: n });
    }
    Ok(out)
}

/// Dot product with four independent accumulators.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    acc.iter().sum::<f64>() + tail
}
