//! Discrete fractional Laplacian `A = (-Laplacian)^{alpha/2}` on (-1, 1)
//! with homogeneous Dirichlet conditions.
//!
//! Two backends share one type. The Chebyshev backend collocates `-d^2/dx^2`
//! at the Chebyshev–Gauss–Lobatto points, deletes the boundary rows and
//! columns, and raises the result to the power `alpha/2` through its
//! eigendecomposition. The sine backend uses the exact Dirichlet eigenpairs
//! `((j pi / 2)^2, sin(j pi (x+1)/2))` on a uniform grid and serves as an
//! oracle.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// Eigenvalues with `|Im| <= IMAG_TOL * max|Re|` are accepted as real.
pub const IMAG_TOL: f64 = 1e-8;

/// Largest accepted condition number of the eigenvector matrix.
pub const MAX_EIGVEC_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Chebyshev,
    Sine,
}

/// `A = V diag(lambda^{alpha/2}) V^{-1}` together with its factors.
///
/// For the sine backend `V` may hold fewer columns than rows, in which
/// case `V^{-1}` is the left inverse `(2/M) V^T` and `A` vanishes on the
/// orthogonal complement of the retained modes.
#[derive(Debug, Clone)]
pub struct SpectralOperator {
    backend: Backend,
    alpha: f64,
    nodes: Vec<f64>,
    matrix: Mat<f64>,
    laplacian_eigs: Vec<f64>,
    eigs: Vec<f64>,
    vectors: Mat<f64>,
    inverse: Mat<f64>,
}

impl SpectralOperator {
    /// Chebyshev collocation operator with `m` grid intervals.
    pub fn chebyshev(m: usize, alpha: f64) -> Result<Self> {
        let (nodes, l) = chebyshev_laplacian(m)?;
        fractional_power(&l, nodes, alpha)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of interior nodes.
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    /// Number of stored eigenpairs.
    pub fn n_modes(&self) -> usize {
        self.eigs.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn matrix(&self) -> &Mat<f64> {
        &self.matrix
    }

    /// Eigenvalues `lambda_j` of the underlying Laplacian, ascending.
    pub fn laplacian_eigenvalues(&self) -> &[f64] {
        &self.laplacian_eigs
    }

    /// Eigenvalues `lambda_j^{alpha/2}` of `A`, ascending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigs
    }

    pub fn eigenvectors(&self) -> &Mat<f64> {
        &self.vectors
    }

    pub fn inverse_eigenvectors(&self) -> &Mat<f64> {
        &self.inverse
    }

    /// Dense product `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.matrix, x)
    }

    /// `A x` evaluated as `V (Lambda (V^{-1} x))`.
    pub fn apply_spectral(&self, x: &[f64]) -> Vec<f64> {
        let mut c = self.to_modal(x);
        for (ci, mu) in c.iter_mut().zip(&self.eigs) {
            *ci *= mu;
        }
        self.from_modal(&c)
    }

    /// Modal coefficients `V^{-1} x`.
    pub fn to_modal(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.inverse, x)
    }

    /// Nodal values `V c`.
    pub fn from_modal(&self, c: &[f64]) -> Vec<f64> {
        matvec(&self.vectors, c)
    }

    /// Factorizes `mu I + A` once for repeated solves.
    pub fn shifted_solver(&self, mu: f64) -> Result<ShiftedSolver> {
        if !(mu > 0.0) {
            return Err(invalid(format!("shift must be positive, got {mu}")));
        }
        let n = self.dim();
        let mut shifted = self.matrix.clone();
        for i in 0..n {
            shifted[(i, i)] += mu;
        }
        Ok(ShiftedSolver {
            mu,
            lu: shifted.partial_piv_lu(),
            dim: n,
        })
    }
}

/// LU factorization of `mu I + A`.
#[derive(Debug)]
pub struct ShiftedSolver {
    mu: f64,
    lu: PartialPivLu<f64>,
    dim: usize,
}

impl ShiftedSolver {
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rhs.len(),
            });
        }
        let mut col = Mat::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(&mut col);
        Ok(col.col_as_slice(0).to_vec())
    }
}

/// Solves `(mu I + A) u = rhs` with a fresh factorization.
pub fn solve_shifted(op: &SpectralOperator, mu: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    op.shifted_solver(mu)?.solve(rhs)
}

pub(crate) fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    assert_eq!(m.ncols(), x.len(), "matvec dimension mismatch");
    let mut y = vec![0.0; m.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (yi, &mij) in y.iter_mut().zip(m.col_as_slice(j)) {
            *yi += mij * xj;
        }
    }
    y
}

/// Chebyshev–Gauss–Lobatto collocation of `-d^2/dx^2` with Dirichlet
/// conditions.
///
/// Returns the interior nodes `x_i = cos(i pi / m)`, `i = 1..m-1`, and the
/// `(m-1) x (m-1)` matrix obtained by squaring the first-derivative matrix,
/// negating, and deleting the boundary rows and columns. Nodes are computed
/// as `sin(pi (m - 2i) / (2m))` so that they are exactly antisymmetric and
/// `x = 0` is hit exactly for even `m`.
pub fn chebyshev_laplacian(m: usize) -> Result<(Vec<f64>, Mat<f64>)> {
    if m < 4 {
        return Err(invalid(format!("Chebyshev grid needs at least 4 intervals, got {m}")));
    }
    let mf = m as f64;
    let x: Vec<f64> = (0..=m)
        .map(|i| (PI * (mf - 2.0 * i as f64) / (2.0 * mf)).sin())
        .collect();
    let c = |i: usize| if i == 0 || i == m { 2.0 } else { 1.0 };
    let mut d = Mat::<f64>::zeros(m + 1, m + 1);
    for i in 0..=m {
        for j in 0..=m {
            if i != j {
                // x_i - x_j = 2 sin((i+j) pi / 2m) sin((j-i) pi / 2m)
                let diff = 2.0
                    * (PI * (i + j) as f64 / (2.0 * mf)).sin()
                    * (PI * (j as f64 - i as f64) / (2.0 * mf)).sin();
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                d[(i, j)] = c(i) / c(j) * sign / diff;
            }
        }
        // negative-sum trick
        let s: f64 = (0..=m).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    let d2 = &d * &d;
    let l = Mat::from_fn(m - 1, m - 1, |i, j| -d2[(i + 1, j + 1)]);
    Ok((x[1..m].to_vec(), l))
}

/// Raises a diagonalizable matrix with positive real spectrum to the power
/// `alpha / 2`.
pub fn fractional_power(l: &Mat<f64>, nodes: Vec<f64>, alpha: f64) -> Result<SpectralOperator> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("space order must lie in (0,2], got {alpha}")));
    }
    let n = l.nrows();
    if l.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: l.ncols(),
        });
    }
    if nodes.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: nodes.len(),
        });
    }
    let evd = l
        .eigen()
        .map_err(|e| Error::Spectral(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();

    let max_re = (0..n).map(|i| s[i].re.abs()).fold(0.0, f64::max);
    let mut has_imag = false;
    for i in 0..n {
        let (re, im) = (s[i].re, s[i].im);
        if !(re > 0.0) {
            return Err(Error::Spectral(format!("eigenvalue {re}{im:+}i has non-positive real part")));
        }
        if im.abs() > IMAG_TOL * max_re {
            return Err(Error::Spectral(format!(
                "eigenvalue {re}{im:+}i has imaginary part above tolerance"
            )));
        }
        has_imag |= im != 0.0;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re));
    let laplacian_eigs: Vec<f64> = order.iter().map(|&i| s[i].re).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, order[j])].re);

    let sv = vectors
        .singular_values()
        .map_err(|e| Error::Spectral(format!("singular values failed: {e:?}")))?;
    let cond = sv[0] / sv[n - 1];
    if !(cond <= MAX_EIGVEC_CONDITION) {
        return Err(Error::Spectral(format!(
            "eigenvector matrix is numerically singular (condition {cond:e})"
        )));
    }
    if has_imag {
        // real parts of complex eigenvectors are only usable if they still
        // diagonalize L
        let lv = l * &vectors;
        let scale = max_re * sv[0];
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..n {
                worst = worst.max((lv[(i, j)] - vectors[(i, j)] * laplacian_eigs[j]).abs());
            }
        }
        if worst > 1e-8 * scale {
            return Err(Error::Spectral("projected eigenvectors do not diagonalize L".into()));
        }
    }

    let inverse = vectors.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    let eigs: Vec<f64> = laplacian_eigs.iter().map(|l| l.powf(alpha / 2.0)).collect();
    let matrix = reconstruct(&vectors, &eigs, &inverse);
    Ok(SpectralOperator {
        backend: Backend::Chebyshev,
        alpha,
        nodes,
        matrix,
        laplacian_eigs,
        eigs,
        vectors,
        inverse,
    })
}

fn reconstruct(v: &Mat<f64>, eigs: &[f64], inv: &Mat<f64>) -> Mat<f64> {
    let scaled = Mat::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * eigs[j]);
    &scaled * inv
}

/// `j`-th Dirichlet eigenvalue `(j pi / 2)^2` of `-d^2/dx^2` on (-1, 1).
pub fn dirichlet_eigenvalue(j: usize) -> f64 {
    let w = j as f64 * PI / 2.0;
    w * w
}

/// `j`-th Dirichlet eigenfunction `sin(j pi (x + 1) / 2)`.
pub fn dirichlet_eigenfunction(j: usize, x: f64) -> f64 {
    (j as f64 * PI * (x + 1.0) / 2.0).sin()
}

/// Operator built from the exact Dirichlet eigenpairs on the uniform grid
/// `x_i = -1 + 2i/m_grid`, `i = 1..m_grid-1`, keeping the first `n_modes`.
pub fn sine_operator(n_modes: usize, m_grid: usize, alpha: f64) -> Result<SpectralOperator> {
    if m_grid < 2 {
        return Err(invalid(format!("sine grid needs at least 2 intervals, got {m_grid}")));
    }
    if n_modes == 0 || n_modes > m_grid - 1 {
        return Err(invalid(format!(
            "number of modes must be in 1..={}, got {n_modes}",
            m_grid - 1
        )));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid(format!("space order must lie in (0,2], got {alpha}")));
    }
    let n = m_grid - 1;
    let mf = m_grid as f64;
    let nodes: Vec<f64> = (1..m_grid).map(|i| -1.0 + 2.0 * i as f64 / mf).collect();
    // sin(j pi (x_i + 1) / 2) = sin(j pi i / m_grid)
    let vectors = Mat::from_fn(n, n_modes, |i, j| {
        (PI * ((j + 1) * (i + 1)) as f64 / mf).sin()
    });
    let inverse = Mat::from_fn(n_modes, n, |j, i| 2.0 / mf * vectors[(i, j)]);
    let laplacian_eigs: Vec<f64> = (1..=n_modes).map(dirichlet_eigenvalue).collect();
    let eigs: Vec<f64> = laplacian_eigs.iter().map(|l| l.powf(alpha / 2.0)).collect();
    let matrix = reconstruct(&vectors, &eigs, &inverse);
    Ok(SpectralOperator {
        backend: Backend::Sine,
        alpha,
        nodes,
        matrix,
        laplacian_eigs,
        eigs,
        vectors,
        inverse,
    })
}
