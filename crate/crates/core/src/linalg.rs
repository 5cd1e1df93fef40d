//! Small dense linear-algebra helpers shared by the Gaussian modules.
//!
//! Everything that needs a determinant or an inverse of a covariance goes
//! through a Cholesky factor; log-determinants are sums of log factor
//! diagonals.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{IbError, Result};

/// Eigenvalues below this (and above [`REJECT_BELOW`]) are treated as rounding
/// noise on a conditioning block and repaired with [`JITTER`].
pub const REPAIR_BELOW: f64 = 1e-12;
/// Eigenvalues below this mark a genuinely indefinite matrix.
pub const REJECT_BELOW: f64 = -1e-10;
pub const JITTER: f64 = 1e-10;

pub type Factor = Cholesky<f64, Dyn>;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factor of a matrix that must be strictly positive definite.
pub fn cholesky_pd(m: &DMatrix<f64>, what: &str) -> Result<Factor> {
    Cholesky::new(symmetrize(m)).ok_or_else(|| {
        IbError::DegenerateCovariance(format!(
            "{what} is not positive definite (min eigenvalue {:e})",
            min_eigenvalue(m)
        ))
    })
}

/// Cholesky factor of a conditioning block, with the one-shot jitter repair.
pub fn cholesky_conditioning(m: &DMatrix<f64>) -> Result<Factor> {
    let lambda = min_eigenvalue(m);
    if lambda < REJECT_BELOW {
        return Err(IbError::SingularConditioningBlock(lambda));
    }
    let mut sym = symmetrize(m);
    if lambda < REPAIR_BELOW {
        for i in 0..sym.nrows() {
            sym[(i, i)] += JITTER;
        }
    }
    Cholesky::new(sym).ok_or(IbError::SingularConditioningBlock(lambda))
}

pub fn log_det_factor(f: &Factor) -> f64 {
    2.0 * f.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `ln |m|` for a symmetric positive-definite matrix. The empty matrix has
/// determinant one.
pub fn log_det_pd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(log_det_factor(&cholesky_pd(m, what)?))
}

/// `ln |det m|` for a general square matrix, via LU.
pub fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().abs().ln()
}

pub fn inverse_pd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(cholesky_pd(m, what)?.inverse())
}

/// Extracts the submatrix with the given row and column index lists.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Block-diagonal matrix with `a` in the top-left and `b` in the bottom-right.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.nrows()), b.shape()).copy_from(b);
    out
}

/// Zero-mean Gaussian KL divergence `KL(N(0, p) || N(0, q))` in nats.
pub fn gaussian_kl(p: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(IbError::DimensionMismatch(format!(
            "KL between {:?} and {:?} covariances",
            p.shape(),
            q.shape()
        )));
    }
    let qf = cholesky_pd(q, "reference covariance")?;
    let ld_p = log_det_pd(p, "first covariance")?;
    let trace = qf.solve(p).trace();
    Ok(0.5 * (trace - p.nrows() as f64 + log_det_factor(&qf) - ld_p))
}

/// Log-density of `N(mean, cov)` at `x`, with `cov` given by its factor.
pub fn gaussian_log_density(factor: &Factor, mean: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let diff = x - mean;
    let n = diff.len() as f64;
    let white = factor
        .l_dirty()
        .solve_lower_triangular(&diff)
        .expect("cholesky factor has a positive diagonal");
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det_factor(factor) + white.norm_squared())
}
