//! Convolution quadrature weights generated by the BDFk methods.
//!
//! The k-step BDF generating polynomial is
//! `delta(xi) = sum_{j=1}^k (1/j) (1 - xi)^j`, and the fractional weights
//! `b_j` are the power-series coefficients of `delta(xi)^gamma`. Tempering by
//! `exp(-sigma * j * tau)` turns them into the weights of the substantial
//! derivative. The starting-step correction coefficients are exact
//! fractions and kept here as such.

use std::io::Write;

use num_rational::Ratio;

use crate::error::{invalid, Result};

/// Highest supported BDF order.
pub const MAX_ORDER: usize = 6;

fn check_order(k: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&k) {
        Ok(())
    } else {
        Err(invalid(format!("BDF order must be in 1..={MAX_ORDER}, got {k}")))
    }
}

fn binomial(n: i64, r: i64) -> i64 {
    (0..r).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Coefficients of the BDFk generating polynomial in powers of `xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratingPoly {
    order: usize,
    exact: Vec<Ratio<i64>>,
    coeffs: Vec<f64>,
}

impl GeneratingPoly {
    pub fn order(&self) -> usize {
        self.order
    }

    /// `c_0..c_k` as floating point.
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `c_0..c_k` as exact fractions.
    pub fn exact_coeffs(&self) -> &[Ratio<i64>] {
        &self.exact
    }

    /// Evaluates `delta(xi)` for real `xi`.
    pub fn eval(&self, xi: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * xi + c)
    }
}

/// Expands `sum_{j=1}^k (1/j)(1 - xi)^j` in powers of `xi`.
pub fn bdf_generating_poly(k: usize) -> Result<GeneratingPoly> {
    check_order(k)?;
    let mut exact = vec![Ratio::from_integer(0i64); k + 1];
    for j in 1..=k as i64 {
        for (i, c) in exact.iter_mut().enumerate().take(j as usize + 1) {
            let sign = if i % 2 == 0 { 1 } else { -1 };
            *c += Ratio::new(sign * binomial(j, i as i64), j);
        }
    }
    let coeffs = exact
        .iter()
        .map(|r| *r.numer() as f64 / *r.denom() as f64)
        .collect();
    Ok(GeneratingPoly {
        order: k,
        exact,
        coeffs,
    })
}

/// Power-series coefficients `b_0..b_{n_max}` of `delta(xi)^gamma`.
///
/// Uses Miller's recurrence for powers of a polynomial:
/// `b_n = 1/(n c_0) * sum_{i=1}^{min(n,k)} ((gamma+1) i - n) c_i b_{n-i}`.
pub fn fractional_weights(k: usize, gamma: f64, n_max: usize) -> Result<Vec<f64>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("fractional order must lie in (0,1), got {gamma}")));
    }
    let poly = bdf_generating_poly(k)?;
    let c = poly.coeffs();
    let mut b = Vec::with_capacity(n_max + 1);
    b.push(c[0].powf(gamma));
    for n in 1..=n_max {
        let nf = n as f64;
        let s: f64 = (1..=n.min(k))
            .map(|i| ((gamma + 1.0) * i as f64 - nf) * c[i] * b[n - i])
            .sum();
        b.push(s / (nf * c[0]));
    }
    Ok(b)
}

/// Applies the tempering factor: `q_j = exp(-sigma j tau) b_j`.
pub fn tempered_weights(b: &[f64], sigma: f64, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(invalid(format!("step size must be positive, got {tau}")));
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("tempering must be non-negative, got {sigma}")));
    }
    Ok(b.iter()
        .enumerate()
        .map(|(j, &bj)| (-sigma * j as f64 * tau).exp() * bj)
        .collect())
}

/// Fractional and tempered weights for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    pub order: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub tau: f64,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
}

impl WeightSet {
    pub fn new(order: usize, gamma: f64, sigma: f64, tau: f64, n_max: usize) -> Result<Self> {
        let b = fractional_weights(order, gamma, n_max)?;
        let q = tempered_weights(&b, sigma, tau)?;
        Ok(WeightSet {
            order,
            gamma,
            sigma,
            tau,
            b,
            q,
        })
    }

    pub fn n_max(&self) -> usize {
        self.b.len() - 1
    }

    /// `tau^{-gamma}`, the scale in front of every convolution sum.
    pub fn scale(&self) -> f64 {
        self.tau.powf(-self.gamma)
    }

    /// Writes `j,b_j,q_j` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,b_j,q_j")?;
        for (j, (b, q)) in self.b.iter().zip(&self.q).enumerate() {
            writeln!(out, "{j},{b:e},{q:e}")?;
        }
        Ok(())
    }
}

type Frac = (i64, i64);

const Z: Frac = (0, 1);

// a_n^(k) for n = 1..k-1; the b-row of the table is identical.
const A_TABLE: [&[Frac]; 5] = [
    &[(1, 2)],
    &[(11, 12), (-5, 12)],
    &[(31, 24), (-7, 6), (3, 8)],
    &[(1181, 720), (-177, 80), (341, 240), (-251, 720)],
    &[(2837, 1440), (-2543, 720), (17, 5), (-1201, 720), (95, 288)],
];

const B_TABLE: [&[Frac]; 5] = [
    &[(1, 2)],
    &[(11, 12), (-5, 12)],
    &[(31, 24), (-7, 6), (3, 8)],
    &[(1181, 720), (-177, 80), (341, 240), (-251, 720)],
    &[(2837, 1440), (-2543, 720), (17, 5), (-1201, 720), (95, 288)],
];

// d_{l,n}^(k), rows l = 1..k-2, columns n = 1..k-1.
const D_TABLE: [&[&[Frac]]; 5] = [
    &[],
    &[&[(1, 12), Z]],
    &[&[(1, 6), (-1, 12), Z], &[Z, Z, Z]],
    &[
        &[(59, 240), (-29, 120), (19, 240), Z],
        &[(1, 240), (-1, 240), Z, Z],
        &[(-1, 720), Z, Z, Z],
    ],
    &[
        &[(77, 240), (-7, 15), (73, 240), (-3, 40), Z],
        &[(1, 96), (-1, 60), (1, 160), Z, Z],
        &[(-1, 360), (1, 720), Z, Z, Z],
        &[Z, Z, Z, Z, Z],
    ],
];

fn ratio(f: Frac) -> Ratio<i64> {
    Ratio::new(f.0, f.1)
}

fn to_f64(r: &Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Starting-step correction coefficients of the corrected BDFk scheme.
///
/// `a[n-1]` multiplies `-exp(-sigma t_n) A G^0`, `b[n-1]` multiplies `f(0)`
/// and `d[l-1][n-1]` multiplies `tau^l d^l f/dt^l (0)`, for steps
/// `1 <= n <= k-1`. Order 1 has no correction and an empty table.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTable {
    pub order: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub d: Vec<Vec<f64>>,
    exact_a: Vec<Ratio<i64>>,
    exact_b: Vec<Ratio<i64>>,
    exact_d: Vec<Vec<Ratio<i64>>>,
}

impl CorrectionTable {
    /// Number of corrected starting steps (`k - 1`).
    pub fn steps(&self) -> usize {
        self.a.len()
    }

    pub fn exact_a(&self) -> &[Ratio<i64>] {
        &self.exact_a
    }

    pub fn exact_b(&self) -> &[Ratio<i64>] {
        &self.exact_b
    }

    pub fn exact_d(&self) -> &[Vec<Ratio<i64>>] {
        &self.exact_d
    }
}

pub fn correction_table(k: usize) -> Result<CorrectionTable> {
    check_order(k)?;
    if k == 1 {
        return Ok(CorrectionTable {
            order: 1,
            a: vec![],
            b: vec![],
            d: vec![],
            exact_a: vec![],
            exact_b: vec![],
            exact_d: vec![],
        });
    }
    let exact_a: Vec<_> = A_TABLE[k - 2].iter().copied().map(ratio).collect();
    let exact_b: Vec<_> = B_TABLE[k - 2].iter().copied().map(ratio).collect();
    let exact_d: Vec<Vec<_>> = D_TABLE[k - 2]
        .iter()
        .map(|row| row.iter().copied().map(ratio).collect())
        .collect();
    Ok(CorrectionTable {
        order: k,
        a: exact_a.iter().map(to_f64).collect(),
        b: exact_b.iter().map(to_f64).collect(),
        d: exact_d
            .iter()
            .map(|row| row.iter().map(to_f64).collect())
            .collect(),
        exact_a,
        exact_b,
        exact_d,
    })
}
