//! Gaussian information bottleneck.
//!
//! For jointly Gaussian `(X, Y)` the optimal bottleneck is a noisy linear
//! projection `T = A X + ξ` with `ξ ~ N(0, I)`. With `Σ_{X|Y}` the
//! conditional covariance, the objective is
//!
//! ```text
//! I(X;T) - β I(T;Y) = (1 - β)/2 · ln|A Σ_X Aᵀ + I| + β/2 · ln|A Σ_{X|Y} Aᵀ + I|
//! ```
//!
//! The analytic optimum uses the left eigenvectors `v_i` of `Σ_{X|Y} Σ_X⁻¹`
//! with eigenvalues `λ_i`: row `i` of `A` is `α_i v_iᵀ` once
//! `β > 1/(1 - λ_i)`, with `α_i² = (β(1 - λ_i) - 1) / (λ_i v_iᵀ Σ_X v_i)`,
//! and zero otherwise. [`gib_numeric`] minimises the same objective directly
//! and is the reference the analytic path is tested against.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{IbError, Result};
use crate::gaussian::GaussianJoint;
use crate::linalg::{self, cholesky_pd, log_det_pd};
use crate::optim::{self, OptOptions};
use crate::rng;

const EIGEN_CLAMP: f64 = 1e-10;
const STARTS: u64 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GibSolution {
    /// Projection matrix, `dim T × dim X`.
    pub a: DMatrix<f64>,
    pub noise_cov: DMatrix<f64>,
    pub beta: f64,
    pub i_xt: f64,
    pub i_ty: f64,
    /// Critical trade-off values in ascending order.
    pub critical_betas: Vec<f64>,
}

impl GibSolution {
    /// Number of nonzero rows of the projection.
    pub fn rank(&self) -> usize {
        (0..self.a.nrows())
            .filter(|&i| self.a.row(i).iter().any(|v| *v != 0.0))
            .count()
    }

    pub fn objective(&self) -> f64 {
        self.i_xt - self.beta * self.i_ty
    }
}

/// `Σ_X` and `Σ_{X|Y}` of a joint with blocks `X` and `Y`.
#[derive(Debug, Clone)]
pub struct GibProblem {
    pub sigma_x: DMatrix<f64>,
    pub sigma_x_given_y: DMatrix<f64>,
}

impl GibProblem {
    pub fn new(joint: &GaussianJoint) -> Result<Self> {
        let sigma_x = joint.block_cov(&["X"])?;
        cholesky_pd(&sigma_x, "Σ_X")?;
        cholesky_pd(&joint.block_cov(&["Y"])?, "Σ_Y")?;
        let sigma_x_given_y = joint.conditional(&["X"], &["Y"])?.cov;
        Ok(Self { sigma_x, sigma_x_given_y })
    }

    pub fn x_dim(&self) -> usize {
        self.sigma_x.nrows()
    }

    /// Objective and gradient with respect to `A`.
    pub fn objective_and_grad(&self, a: &DMatrix<f64>, beta: f64) -> (f64, DMatrix<f64>) {
        let t = a.nrows();
        let id = DMatrix::identity(t, t);
        let m_x = a * &self.sigma_x * a.transpose() + &id;
        let m_c = a * &self.sigma_x_given_y * a.transpose() + &id;
        let (Some(f_x), Some(f_c)) = (
            nalgebra::Cholesky::new(linalg::symmetrize(&m_x)),
            nalgebra::Cholesky::new(linalg::symmetrize(&m_c)),
        ) else {
            return (f64::INFINITY, DMatrix::zeros(a.nrows(), a.ncols()));
        };
        let value = 0.5 * (1.0 - beta) * linalg::log_det_factor(&f_x)
            + 0.5 * beta * linalg::log_det_factor(&f_c);
        let grad = f_x.solve(&(a * &self.sigma_x)) * (1.0 - beta)
            + f_c.solve(&(a * &self.sigma_x_given_y)) * beta;
        (value, grad)
    }
}

fn check_xy(joint: &GaussianJoint) -> Result<()> {
    for name in ["X", "Y"] {
        if !joint.has_block(name) {
            return Err(IbError::UnknownBlock(name.into()));
        }
    }
    Ok(())
}

/// Joint over `(X, Y, T)` for `T = A X + ξ`, `ξ ~ N(0, noise_cov)`.
pub fn induced_joint(
    joint: &GaussianJoint,
    a: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
) -> Result<GaussianJoint> {
    check_xy(joint)?;
    let sx = joint.block_cov(&["X"])?;
    let sy = joint.block_cov(&["Y"])?;
    let sxy = joint.cross_cov(&["X"], &["Y"])?;
    let (dx, dy, dt) = (sx.nrows(), sy.nrows(), a.nrows());
    if a.ncols() != dx || noise_cov.shape() != (dt, dt) {
        return Err(IbError::DimensionMismatch(format!(
            "projection is {:?} and noise {:?} for dim X = {dx}",
            a.shape(),
            noise_cov.shape()
        )));
    }
    let st = a * &sx * a.transpose() + noise_cov;
    let stx = a * &sx;
    let sty = a * &sxy;
    let n = dx + dy + dt;
    let mut cov = DMatrix::zeros(n, n);
    cov.view_mut((0, 0), (dx, dx)).copy_from(&sx);
    cov.view_mut((0, dx), (dx, dy)).copy_from(&sxy);
    cov.view_mut((dx, 0), (dy, dx)).copy_from(&sxy.transpose());
    cov.view_mut((dx, dx), (dy, dy)).copy_from(&sy);
    cov.view_mut((dx + dy, 0), (dt, dx)).copy_from(&stx);
    cov.view_mut((0, dx + dy), (dx, dt)).copy_from(&stx.transpose());
    cov.view_mut((dx + dy, dx), (dt, dy)).copy_from(&sty);
    cov.view_mut((dx, dx + dy), (dy, dt)).copy_from(&sty.transpose());
    cov.view_mut((dx + dy, dx + dy), (dt, dt)).copy_from(&st);
    GaussianJoint::new(vec![("X", dx), ("Y", dy), ("T", dt)], linalg::symmetrize(&cov))
}

/// `(I(X;T), I(T;Y))` for `T = A X + ξ`.
pub fn information_pair(
    joint: &GaussianJoint,
    a: &DMatrix<f64>,
    noise_cov: &DMatrix<f64>,
) -> Result<(f64, f64)> {
    let full = induced_joint(joint, a, noise_cov)?;
    Ok((
        full.mutual_information(&["X"], &["T"])?,
        full.mutual_information(&["T"], &["Y"])?,
    ))
}

/// `I(X; AX + ξ) - β I(AX + ξ; Y)` with identity noise.
pub fn gib_objective(joint: &GaussianJoint, a: &DMatrix<f64>, beta: f64) -> Result<f64> {
    let id = DMatrix::identity(a.nrows(), a.nrows());
    let (i_xt, i_ty) = information_pair(joint, a, &id)?;
    Ok(i_xt - beta * i_ty)
}

/// Eigen-structure of `Σ_{X|Y} Σ_X⁻¹`: eigenvalues ascending with the
/// matching left eigenvectors as columns.
pub fn gib_eigen(problem: &GibProblem) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let product = &problem.sigma_x_given_y
        * linalg::inverse_pd(&problem.sigma_x, "Σ_X")?;
    let imag = product
        .complex_eigenvalues()
        .iter()
        .map(|c| c.im.abs())
        .fold(0.0, f64::max);
    if imag > EIGEN_CLAMP {
        return Err(IbError::ComplexEigenvalue(imag));
    }
    // Σ_X = L Lᵀ; the left eigenvectors satisfy Σ_X⁻¹ Σ_{X|Y} v = λ v, and
    // with w = Lᵀ v that is the symmetric problem L⁻¹ Σ_{X|Y} L⁻ᵀ w = λ w.
    let chol = cholesky_pd(&problem.sigma_x, "Σ_X")?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))
        .expect("cholesky factor is invertible");
    let sym = linalg::symmetrize(&(&l_inv * &problem.sigma_x_given_y * l_inv.transpose()));
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order
        .iter()
        .map(|&i| {
            let v = eig.eigenvalues[i];
            if v.abs() < EIGEN_CLAMP {
                0.0
            } else if (v - 1.0).abs() < EIGEN_CLAMP {
                1.0
            } else {
                v
            }
        })
        .collect();
    let w = DMatrix::from_fn(l.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    let vectors = l_inv.transpose() * w;
    Ok((values, vectors))
}

fn critical_betas(eigenvalues: &[f64]) -> Vec<f64> {
    eigenvalues
        .iter()
        .filter(|l| **l < 1.0)
        .map(|l| 1.0 / (1.0 - l))
        .collect()
}

pub fn gib_analytic(joint: &GaussianJoint, beta: f64) -> Result<GibSolution> {
    check_xy(joint)?;
    let problem = GibProblem::new(joint)?;
    let (eigenvalues, vectors) = gib_eigen(&problem)?;
    if let Some(l) = eigenvalues.iter().find(|l| **l <= 0.0) {
        return Err(IbError::DegenerateCovariance(format!(
            "Σ_X|Y is singular (eigenvalue {l:e}); X is determined by Y"
        )));
    }
    let dx = problem.x_dim();
    let mut a = DMatrix::zeros(dx, dx);
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        if lambda >= 1.0 || beta <= 1.0 / (1.0 - lambda) {
            continue;
        }
        let v = vectors.column(i);
        let r = (v.transpose() * &problem.sigma_x * v)[(0, 0)];
        let alpha = ((beta * (1.0 - lambda) - 1.0) / (lambda * r)).sqrt();
        a.row_mut(i).copy_from(&(v.transpose() * alpha));
    }
    let noise_cov = DMatrix::identity(dx, dx);
    let (i_xt, i_ty) = information_pair(joint, &a, &noise_cov)?;
    Ok(GibSolution {
        a,
        noise_cov,
        beta,
        i_xt,
        i_ty,
        critical_betas: critical_betas(&eigenvalues),
    })
}

#[derive(Debug, Clone)]
pub struct GibNumeric {
    pub solution: GibSolution,
    pub objective: f64,
    /// Max-norm gap between the analytic gradient and central differences
    /// (step 1e-5) at the returned point.
    pub fd_gradient_error: f64,
    pub converged: bool,
}

/// Multi-start BFGS minimisation of the objective over `A` (`t_dim × dim X`).
pub fn gib_numeric(
    joint: &GaussianJoint,
    beta: f64,
    t_dim: usize,
    seed: u64,
    tol: f64,
) -> Result<GibNumeric> {
    check_xy(joint)?;
    if t_dim == 0 {
        return Err(IbError::InvalidArgument("t_dim must be >= 1".into()));
    }
    let problem = GibProblem::new(joint)?;
    let dx = problem.x_dim();
    let f = |v: &DVector<f64>| {
        let a = DMatrix::from_column_slice(t_dim, dx, v.as_slice());
        let (value, grad) = problem.objective_and_grad(&a, beta);
        (value, DVector::from_column_slice(grad.as_slice()))
    };
    let opts = OptOptions { tol, grad_tol: 1e-11, max_iter: 20_000, step: 1.0 };
    let mut best: Option<optim::OptResult> = None;
    for start in 0..STARTS {
        let mut rng = rng::stream(seed.wrapping_add(start), 0);
        let x0 = DVector::from_column_slice(rng::normal_matrix(&mut rng, t_dim, dx).as_slice());
        let res = optim::bfgs(f, x0, opts);
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let best = best.expect("at least one start");
    let fd_gradient_error = optim::gradient_check(f, &best.x, 1e-5);
    let a = DMatrix::from_column_slice(t_dim, dx, best.x.as_slice());
    let noise_cov = DMatrix::identity(t_dim, t_dim);
    let (i_xt, i_ty) = information_pair(joint, &a, &noise_cov)?;
    let (eigenvalues, _) = gib_eigen(&problem)?;
    Ok(GibNumeric {
        objective: best.value,
        solution: GibSolution {
            a,
            noise_cov,
            beta,
            i_xt,
            i_ty,
            critical_betas: critical_betas(&eigenvalues),
        },
        fd_gradient_error,
        converged: best.converged,
    })
}

/// Diagonal solution `D = AᵀA = diag(d)` of the sparse bottleneck.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparseGibSolution {
    pub d: Vec<f64>,
    pub beta: f64,
    pub objective: f64,
    pub i_xt: f64,
    pub i_ty: f64,
    /// Largest KKT violation: `|∂f/∂d_i|` on active entries and
    /// `max(0, -∂f/∂d_i)` on entries at zero.
    pub kkt_violation: f64,
    pub converged: bool,
}

impl SparseGibSolution {
    pub fn rank(&self) -> usize {
        self.d.iter().filter(|d| **d > 0.0).count()
    }
}

/// `ln|Σ D + I|`, evaluated as `ln|D^½ Σ D^½ + I|`.
fn log_det_scaled(sigma: &DMatrix<f64>, d: &DVector<f64>) -> Result<f64> {
    let root = d.map(|v| v.max(0.0).sqrt());
    let n = sigma.nrows();
    let m = DMatrix::from_fn(n, n, |i, j| root[i] * sigma[(i, j)] * root[j]) + DMatrix::identity(n, n);
    log_det_pd(&m, "D½ Σ D½ + I")
}

/// `diag((Σ D + I)⁻¹ Σ)`, the gradient of `ln|Σ D + I|` in `d`.
fn log_det_scaled_grad(sigma: &DMatrix<f64>, d: &DVector<f64>) -> DVector<f64> {
    let n = sigma.nrows();
    let m = sigma * DMatrix::from_diagonal(d) + DMatrix::identity(n, n);
    let g = m.lu().solve(sigma).expect("Σ D + I is invertible for d >= 0");
    g.diagonal()
}

/// `∂² ln|Σ D + I| / ∂d_i ∂d_j = -G_ij G_ji` with `G = (Σ D + I)⁻¹ Σ`.
fn log_det_scaled_hessian(sigma: &DMatrix<f64>, d: &DVector<f64>) -> DMatrix<f64> {
    let n = sigma.nrows();
    let m = sigma * DMatrix::from_diagonal(d) + DMatrix::identity(n, n);
    let g = m.lu().solve(sigma).expect("Σ D + I is invertible for d >= 0");
    DMatrix::from_fn(n, n, |i, j| -g[(i, j)] * g[(j, i)])
}

impl GibProblem {
    fn sparse_hessian(&self, d: &DVector<f64>, beta: f64) -> DMatrix<f64> {
        log_det_scaled_hessian(&self.sigma_x, d) * (0.5 * (1.0 - beta))
            + log_det_scaled_hessian(&self.sigma_x_given_y, d) * (0.5 * beta)
    }

    /// Projected Newton steps on the free coordinates (positive, or at zero
    /// with a descent direction into the orthant). The objective is flat in
    /// `d` for large entries, where first-order steps stall once objective
    /// changes reach rounding level, so a step is accepted when it shrinks
    /// the projected gradient.
    fn sparse_newton_polish(&self, d: DVector<f64>, beta: f64) -> DVector<f64> {
        let mut d = d;
        let mut pgn = optim::projected_gradient_norm(&d, &self.sparse_objective_and_grad(&d, beta).1);
        for _ in 0..50 {
            let (_, g) = self.sparse_objective_and_grad(&d, beta);
            let free: Vec<usize> = (0..d.len()).filter(|&i| d[i] > 0.0 || g[i] < 0.0).collect();
            if free.is_empty() || pgn < 1e-15 {
                break;
            }
            let h = linalg::select(&self.sparse_hessian(&d, beta), &free, &free);
            let Some(chol) = h.cholesky() else {
                break;
            };
            let g_free = DVector::from_iterator(free.len(), free.iter().map(|&i| g[i]));
            let step = chol.solve(&g_free);
            let mut cand = d.clone();
            for (k, &i) in free.iter().enumerate() {
                cand[i] = (d[i] - step[k]).max(0.0);
            }
            let (v, gc) = self.sparse_objective_and_grad(&cand, beta);
            let cand_pgn = optim::projected_gradient_norm(&cand, &gc);
            if !v.is_finite() || cand_pgn >= pgn {
                break;
            }
            d = cand;
            pgn = cand_pgn;
        }
        d
    }

    pub fn sparse_objective_and_grad(&self, d: &DVector<f64>, beta: f64) -> (f64, DVector<f64>) {
        let (Ok(lx), Ok(lc)) = (
            log_det_scaled(&self.sigma_x, d),
            log_det_scaled(&self.sigma_x_given_y, d),
        ) else {
            return (f64::INFINITY, DVector::zeros(d.len()));
        };
        let value = 0.5 * (1.0 - beta) * lx + 0.5 * beta * lc;
        let grad = log_det_scaled_grad(&self.sigma_x, d) * (0.5 * (1.0 - beta))
            + log_det_scaled_grad(&self.sigma_x_given_y, d) * (0.5 * beta);
        (value, grad)
    }
}

/// Projected gradient descent over `d >= 0` from 8 log-uniform starts in
/// `[1e-3, 10]`, followed by projected Newton polishing of the best start.
pub fn sparse_gib(joint: &GaussianJoint, beta: f64, tol: f64) -> Result<SparseGibSolution> {
    check_xy(joint)?;
    let problem = GibProblem::new(joint)?;
    let n = problem.x_dim();
    let f = |d: &DVector<f64>| problem.sparse_objective_and_grad(d, beta);
    let opts = OptOptions { tol, grad_tol: 1e-11, max_iter: 200_000, step: 1.0 };
    let mut best: Option<optim::OptResult> = None;
    for start in 0..STARTS {
        let mut rng = rng::stream(0x5EED, start);
        let d0 = DVector::from_fn(n, |_, _| 10f64.powf(rng::uniform(&mut rng, -3.0, 1.0)));
        let res = optim::projected_gradient_descent(f, d0, opts);
        if best.as_ref().is_none_or(|b| res.value < b.value) {
            best = Some(res);
        }
    }
    let mut best = best.expect("at least one start");
    let polished = problem.sparse_newton_polish(best.x.clone(), beta);
    let (value, grad) = f(&polished);
    if value <= best.value + 1e-12 * (1.0 + best.value.abs()) {
        best.x = polished;
        best.value = value;
        best.grad = grad;
    }
    let kkt_violation = optim::projected_gradient_norm(&best.x, &best.grad);
    let a = DMatrix::from_diagonal(&best.x.map(f64::sqrt));
    let (i_xt, i_ty) = information_pair(joint, &a, &DMatrix::identity(n, n))?;
    Ok(SparseGibSolution {
        d: best.x.iter().copied().collect(),
        beta,
        objective: best.value,
        i_xt,
        i_ty,
        kkt_violation,
        converged: best.converged,
    })
}
