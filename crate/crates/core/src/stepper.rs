//! Time marching for `D_t^gamma G + A G = f` with the tempered Caputo
//! derivative, using BDFk convolution quadrature.
//!
//! Both schemes work in the shifted variable `W^n = G^n - exp(-sigma t_n) G^0`
//! (so `W^0 = 0`) and solve at every step
//!
//! ```text
//! (tau^-gamma q_0 I + A) W^n = f(t_n) - exp(-sigma t_n) A G^0
//!                              - tau^-gamma sum_{j=1}^n q_j W^{n-j} + c_n
//! ```
//!
//! where `c_n` is zero for the standard scheme and, for the corrected
//! scheme at steps `1 <= n <= k-1`,
//! `-a_n exp(-sigma t_n) A G^0 + b_n f(0) + sum_l d_{l,n} tau^l f^(l)(0)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{correction_table, CorrectionTable, WeightSet, MAX_ORDER};
use crate::spatial::SpectralOperator;

/// Forcing `f(x_i, t)` addressed by interior node index.
pub type ForcingFn = dyn Fn(usize, f64) -> f64 + Send + Sync;

/// Abort threshold: `|G^n|_inf > BLOW_UP_FACTOR (1 + |G^0|_inf)`.
pub const BLOW_UP_FACTOR: f64 = 1e12;

/// Data of one initial-boundary value problem on a fixed grid.
#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub t_final: f64,
    /// Initial data on the interior nodes.
    pub g0: Vec<f64>,
    pub forcing: Arc<ForcingFn>,
    /// `d^l f / dt^l (x_i, 0)` for `l = 0, 1, ...`; entry 0 is `f(x_i, 0)`.
    pub f_derivs0: Vec<Vec<f64>>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("alpha", &self.alpha)
            .field("gamma", &self.gamma)
            .field("sigma", &self.sigma)
            .field("t_final", &self.t_final)
            .field("dim", &self.g0.len())
            .field("f_derivs0", &self.f_derivs0.len())
            .finish()
    }
}

impl ProblemSpec {
    /// Problem with `f = 0`; derivative data is filled with zeros.
    pub fn homogeneous(alpha: f64, gamma: f64, sigma: f64, t_final: f64, g0: Vec<f64>) -> Self {
        let n = g0.len();
        ProblemSpec {
            alpha,
            gamma,
            sigma,
            t_final,
            g0,
            forcing: Arc::new(|_, _| 0.0),
            f_derivs0: vec![vec![0.0; n]; MAX_ORDER - 1],
        }
    }

    pub fn dim(&self) -> usize {
        self.g0.len()
    }

    /// Samples the forcing at time `t` on every node.
    pub fn forcing_at(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| (self.forcing)(i, t)).collect()
    }

    pub(crate) fn validate(&self, op: &SpectralOperator) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("fractional order must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.sigma >= 0.0) {
            return Err(invalid(format!("tempering must be non-negative, got {}", self.sigma)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(invalid(format!("final time must be positive, got {}", self.t_final)));
        }
        if (self.alpha - op.alpha()).abs() > 1e-14 {
            return Err(invalid(format!(
                "problem space order {} differs from operator order {}",
                self.alpha,
                op.alpha()
            )));
        }
        if self.g0.len() != op.dim() {
            return Err(Error::DimensionMismatch {
                expected: op.dim(),
                found: self.g0.len(),
            });
        }
        if self.g0.iter().any(|v| !v.is_finite()) {
            return Err(invalid("initial data must be finite"));
        }
        for d in &self.f_derivs0 {
            if d.len() != op.dim() {
                return Err(Error::DimensionMismatch {
                    expected: op.dim(),
                    found: d.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Standard,
    Corrected,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Standard => "standard",
            Scheme::Corrected => "corrected",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Scheme::Standard),
            "corrected" => Ok(Scheme::Corrected),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Solution values `G^0..G^N` on the interior nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub tau: f64,
    pub values: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    pub fn last(&self) -> &[f64] {
        self.values.last().expect("trajectory holds G^0")
    }
}

/// Lagged part of the convolution: `tau^-gamma sum_{j=1}^n q_j W^{n-j}`.
///
/// `w_history` must hold at least `W^0..W^{n-1}`.
pub fn history_convolution(weights: &WeightSet, w_history: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    if n > w_history.len() || n > weights.n_max() {
        return Err(invalid(format!(
            "history index {n} out of range (history {}, weights {})",
            w_history.len(),
            weights.n_max()
        )));
    }
    let dim = w_history.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; dim];
    for j in 1..=n {
        let qj = weights.q[j];
        let w = &w_history[n - j];
        if w.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: w.len(),
            });
        }
        for (a, x) in acc.iter_mut().zip(w) {
            *a += qj * x;
        }
    }
    let scale = weights.scale();
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

pub fn run_standard(problem: &ProblemSpec, op: &SpectralOperator, k: usize, n: usize) -> Result<Trajectory> {
    run(problem, op, Scheme::Standard, k, n)
}

pub fn run_corrected(problem: &ProblemSpec, op: &SpectralOperator, k: usize, n: usize) -> Result<Trajectory> {
    run(problem, op, Scheme::Corrected, k, n)
}

/// Marches `n` uniform steps of size `T / n` with the BDF`k` scheme.
pub fn run(problem: &ProblemSpec, op: &SpectralOperator, scheme: Scheme, k: usize, n: usize) -> Result<Trajectory> {
    problem.validate(op)?;
    let table = correction_table(k)?;
    if n < k {
        return Err(invalid(format!("need at least {k} steps for order {k}, got {n}")));
    }
    if scheme == Scheme::Corrected && problem.f_derivs0.len() < k - 1 {
        return Err(Error::MissingDerivatives {
            order: k,
            needed: k - 2,
            supplied: problem.f_derivs0.len(),
        });
    }
    let tau = problem.t_final / n as f64;
    let weights = WeightSet::new(k, problem.gamma, problem.sigma, tau, n)?;
    let solver = op.shifted_solver(weights.scale() * weights.q[0])?;
    let dim = op.dim();
    let g0 = &problem.g0;
    let ag0 = op.apply(g0);
    let g0_max = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let limit = BLOW_UP_FACTOR * (1.0 + g0_max);

    let mut w_hist: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    w_hist.push(vec![0.0; dim]);
    let mut values = Vec::with_capacity(n + 1);
    values.push(g0.clone());

    for step in 1..=n {
        let t = step as f64 * tau;
        let decay = (-problem.sigma * t).exp();
        let hist = history_convolution(&weights, &w_hist, step)?;
        let mut rhs: Vec<f64> = (0..dim)
            .map(|i| (problem.forcing)(i, t) - decay * ag0[i] - hist[i])
            .collect();
        if scheme == Scheme::Corrected && step < k {
            add_correction(&mut rhs, &table, problem, &ag0, decay, tau, step);
        }
        let w = solver.solve(&rhs)?;
        let g: Vec<f64> = w.iter().zip(g0).map(|(wi, gi)| wi + decay * gi).collect();
        let mut g_max = 0.0f64;
        for v in &g {
            if !v.is_finite() {
                return Err(Error::NonFinite { step });
            }
            g_max = g_max.max(v.abs());
        }
        if g_max > limit {
            return Err(Error::BlowUp { step, norm: g_max });
        }
        w_hist.push(w);
        values.push(g);
    }
    Ok(Trajectory { tau, values })
}

/// Starting-step source of the corrected scheme at step `n` (`1 <= n <= k-1`).
pub(crate) fn add_correction(
    rhs: &mut [f64],
    table: &CorrectionTable,
    problem: &ProblemSpec,
    ag0: &[f64],
    decay: f64,
    tau: f64,
    n: usize,
) {
    let a = table.a[n - 1];
    let b = table.b[n - 1];
    let f0 = &problem.f_derivs0[0];
    for (i, r) in rhs.iter_mut().enumerate() {
        *r += -a * decay * ag0[i] + b * f0[i];
    }
    for (l, row) in table.d.iter().enumerate() {
        let coef = row[n - 1] * tau.powi(l as i32 + 1);
        if coef == 0.0 {
            continue;
        }
        for (r, d) in rhs.iter_mut().zip(&problem.f_derivs0[l + 1]) {
            *r += coef * d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{dirichlet_eigenfunction, sine_operator};

    fn eigen_problem(op: &SpectralOperator, gamma: f64, sigma: f64, j: usize) -> ProblemSpec {
        let g0 = op.nodes().iter().map(|&x| dirichlet_eigenfunction(j, x)).collect();
        ProblemSpec::homogeneous(op.alpha(), gamma, sigma, 1.0, g0)
    }

    #[test]
    fn zero_data_stays_zero() {
        let op = SpectralOperator::chebyshev(16, 1.5).unwrap();
        let p = ProblemSpec::homogeneous(1.5, 0.5, 0.5, 1.0, vec![0.0; op.dim()]);
        for scheme in [Scheme::Standard, Scheme::Corrected] {
            let tr = run(&p, &op, scheme, 3, 20).unwrap();
            assert_eq!(tr.steps(), 20);
            assert!(tr.values.iter().flatten().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn initial_value_is_kept() {
        let op = sine_operator(7, 8, 1.5).unwrap();
        let p = eigen_problem(&op, 0.4, 0.5, 1);
        let tr = run_corrected(&p, &op, 2, 10).unwrap();
        assert_eq!(tr.values[0], p.g0);
    }

    #[test]
    fn single_bdf1_step_closed_form() {
        let (gamma, sigma, alpha) = (0.6, 0.5, 1.5);
        let op = sine_operator(7, 8, alpha).unwrap();
        let p = eigen_problem(&op, gamma, sigma, 1);
        let tr = run_standard(&p, &op, 1, 1).unwrap();
        let tau = 1.0;
        let b0: f64 = 1.0;
        let lam = op.eigenvalues()[0];
        let factor = (-sigma * tau).exp() * b0 / (b0 + tau.powf(gamma) * lam);
        for (g, g0) in tr.values[1].iter().zip(&p.g0) {
            assert!((g - factor * g0).abs() < 1e-14);
        }
    }

    #[test]
    fn corrected_bdf1_equals_standard() {
        let op = SpectralOperator::chebyshev(12, 1.7).unwrap();
        let g0 = op.nodes().iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let p = ProblemSpec::homogeneous(1.7, 0.3, 0.5, 1.0, g0);
        let a = run_standard(&p, &op, 1, 16).unwrap();
        let b = run_corrected(&p, &op, 1, 16).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bdf2_correction_adds_half_f0_at_first_step() {
        let op = SpectralOperator::chebyshev(8, 1.5).unwrap();
        let dim = op.dim();
        let f0: Vec<f64> = op.nodes().iter().map(|x| 1.0 + x).collect();
        let fc = f0.clone();
        let p = ProblemSpec {
            alpha: 1.5,
            gamma: 0.5,
            sigma: 0.3,
            t_final: 1.0,
            g0: vec![0.0; dim],
            forcing: Arc::new(move |i, _| fc[i]),
            f_derivs0: vec![f0.clone()],
        };
        let n = 8;
        let std = run_standard(&p, &op, 2, n).unwrap();
        let cor = run_corrected(&p, &op, 2, n).unwrap();
        let weights = WeightSet::new(2, 0.5, 0.3, 1.0 / n as f64, n).unwrap();
        let solver = op.shifted_solver(weights.scale() * weights.q[0]).unwrap();
        let delta = solver.solve(&f0.iter().map(|v| 0.5 * v).collect::<Vec<_>>()).unwrap();
        for i in 0..dim {
            assert!((cor.values[1][i] - std.values[1][i] - delta[i]).abs() < 1e-13);
        }
        assert_ne!(cor.values[2], std.values[2]);
    }

    #[test]
    fn missing_derivatives_rejected() {
        let op = sine_operator(3, 4, 1.5).unwrap();
        let mut p = eigen_problem(&op, 0.5, 0.5, 1);
        p.f_derivs0.truncate(2);
        assert!(run_corrected(&p, &op, 3, 10).is_ok());
        assert!(matches!(
            run_corrected(&p, &op, 4, 10),
            Err(Error::MissingDerivatives { .. })
        ));
        assert!(run_standard(&p, &op, 4, 10).is_ok());
    }

    #[test]
    fn bad_inputs_rejected() {
        let op = sine_operator(3, 4, 1.5).unwrap();
        let p = eigen_problem(&op, 0.5, 0.5, 1);
        assert!(run_corrected(&p, &op, 3, 2).is_err());
        assert!(run_corrected(&p, &op, 7, 20).is_err());
        let mut q = p.clone();
        q.alpha = 1.6;
        assert!(run_corrected(&q, &op, 2, 20).is_err());
        let mut q = p.clone();
        q.g0.push(0.0);
        assert!(matches!(run_corrected(&q, &op, 2, 20), Err(Error::DimensionMismatch { .. })));
        let mut q = p.clone();
        q.g0[0] = f64::NAN;
        assert!(run_corrected(&q, &op, 2, 20).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let op = sine_operator(3, 4, 1.5).unwrap();
        let mut p = eigen_problem(&op, 0.5, 0.0, 1);
        p.forcing = Arc::new(|_, t| 1e300 * t);
        let err = run_standard(&p, &op, 1, 4).unwrap_err();
        assert!(matches!(err, Error::BlowUp { step: 1, .. }), "{err:?}");
        assert!(err.is_numerical());
    }

    #[test]
    fn history_convolution_cases() {
        let weights = WeightSet::new(3, 0.7, 0.5, 0.1, 16).unwrap();
        let zero = vec![vec![0.0; 4]];
        assert_eq!(history_convolution(&weights, &zero, 1).unwrap(), vec![0.0; 4]);

        let hist = vec![vec![0.0; 3], vec![1.0; 3]];
        let got = history_convolution(&weights, &hist, 2).unwrap();
        let want = weights.scale() * weights.q[1];
        assert!(got.iter().all(|g| (g - want).abs() < 1e-15 * want.abs()));

        assert!(history_convolution(&weights, &hist, 3).is_err());
        assert!(history_convolution(&weights, &vec![vec![0.0]; 20], 17).is_err());
    }

    #[test]
    fn history_convolution_matches_naive_sum() {
        let weights = WeightSet::new(4, 0.3, 0.5, 0.05, 8).unwrap();
        let mut seed = 3u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1);
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let hist: Vec<Vec<f64>> = (0..8).map(|_| (0..5).map(|_| next()).collect()).collect();
        let got = history_convolution(&weights, &hist, 8).unwrap();
        for i in 0..5 {
            let mut naive = 0.0;
            for m in 0..8 {
                naive += weights.q[8 - m] * hist[m][i];
            }
            naive *= 0.05f64.powf(-0.3);
            assert!((got[i] - naive).abs() < 1e-13);
        }
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("standard".parse::<Scheme>().unwrap(), Scheme::Standard);
        assert_eq!("corrected".parse::<Scheme>().unwrap(), Scheme::Corrected);
        assert!("bdf".parse::<Scheme>().is_err());
    }
}
