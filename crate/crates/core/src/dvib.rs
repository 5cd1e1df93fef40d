//! Linear-Gaussian variational bottleneck and the copula preprocessing.
//!
//! The encoder is `T = A X + ξ` with `ξ ~ N(0, diag(exp(u)))` and the decoder
//! is `Y | T ~ N(B T, diag(exp(w)))`. With these maps every term of the
//! variational objective is closed form:
//!
//! ```text
//! value = E_X KL(P(T|X) || P(T)) - β (E log P_dec(Y|T) + H(Y))
//! ```
//!
//! where `P(T)` is the exact induced marginal, not a fixed prior.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{IbError, Result};
use crate::gaussian::{expected_log_density, GaussianConditional, GaussianJoint};
use crate::gib::induced_joint;
use crate::linalg::{self, cholesky_pd, log_det_factor};
use crate::optim::{self, OptOptions};
use crate::rng;

/// Log-variances are clamped to `[ln 1e-8, ln 1e8]`.
pub const MIN_LOG_VAR: f64 = -18.420_680_743_952_367;
pub const MAX_LOG_VAR: f64 = 18.420_680_743_952_367;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDvibParams {
    /// `dim T × dim X`.
    pub enc_weight: DMatrix<f64>,
    /// Log noise variances of `T | X`, one per coordinate of `T`.
    pub enc_logvar: DVector<f64>,
    /// `dim Y × dim T`.
    pub dec_weight: DMatrix<f64>,
    /// Log noise variances of `Y | T`, one per coordinate of `Y`.
    pub dec_logvar: DVector<f64>,
}

impl LinearDvibParams {
    pub fn t_dim(&self) -> usize {
        self.enc_weight.nrows()
    }

    fn check(&self, dx: usize, dy: usize) -> Result<()> {
        let t = self.t_dim();
        let ok = self.enc_weight.ncols() == dx
            && self.enc_logvar.len() == t
            && self.dec_weight.shape() == (dy, t)
            && self.dec_logvar.len() == dy;
        if !ok {
            return Err(IbError::DimensionMismatch(format!(
                "parameters do not fit dim X = {dx}, dim Y = {dy}, dim T = {t}"
            )));
        }
        if self.enc_logvar.iter().chain(self.dec_logvar.iter()).any(|v| !v.is_finite()) {
            return Err(IbError::InvalidArgument("log-variances must be finite".into()));
        }
        Ok(())
    }

    pub fn enc_noise_cov(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.enc_logvar.map(clamp_exp))
    }

    pub fn dec_noise_cov(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.dec_logvar.map(clamp_exp))
    }

    fn to_flat(&self) -> DVector<f64> {
        let parts = [
            self.enc_weight.as_slice(),
            self.enc_logvar.as_slice(),
            self.dec_weight.as_slice(),
            self.dec_logvar.as_slice(),
        ];
        DVector::from_iterator(
            parts.iter().map(|p| p.len()).sum(),
            parts.iter().flat_map(|p| p.iter().copied()),
        )
    }

    fn from_flat(v: &DVector<f64>, dx: usize, dy: usize, t: usize) -> Self {
        let s = v.as_slice();
        let (a, rest) = s.split_at(t * dx);
        let (u, rest) = rest.split_at(t);
        let (b, w) = rest.split_at(dy * t);
        Self {
            enc_weight: DMatrix::from_column_slice(t, dx, a),
            enc_logvar: DVector::from_column_slice(u),
            dec_weight: DMatrix::from_column_slice(dy, t, b),
            dec_logvar: DVector::from_column_slice(w),
        }
    }
}

fn clamp_exp(v: f64) -> f64 {
    v.clamp(MIN_LOG_VAR, MAX_LOG_VAR).exp()
}

/// Derivative of `clamp_exp`, zero where the clamp is active.
fn clamp_exp_grad(v: f64) -> f64 {
    if (MIN_LOG_VAR..=MAX_LOG_VAR).contains(&v) {
        v.exp()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DvibValue {
    pub value: f64,
    /// `E_X KL(P(T|X) || P(T))`.
    pub i_xt_term: f64,
    /// `E log P_dec(Y|T) + H(Y)`.
    pub i_ty_bound_term: f64,
}

/// The objective evaluated through the induced joint of `(X, Y, T)`.
pub fn dvib_objective(
    params: &LinearDvibParams,
    joint: &GaussianJoint,
    beta: f64,
) -> Result<DvibValue> {
    let dx = joint.block_dim("X")?;
    let dy = joint.block_dim("Y")?;
    params.check(dx, dy)?;
    let full = induced_joint(joint, &params.enc_weight, &params.enc_noise_cov())?;
    cholesky_pd(&full.block_cov(&["T"])?, "covariance of T")?;
    let i_xt_term = full.mutual_information(&["X"], &["T"])?;
    let decoder = GaussianConditional {
        regression: params.dec_weight.clone(),
        cov: params.dec_noise_cov(),
    };
    let i_ty_bound_term =
        expected_log_density(&full, &["Y"], &["T"], &decoder)? + full.entropy(&["Y"])?;
    Ok(DvibValue { value: i_xt_term - beta * i_ty_bound_term, i_xt_term, i_ty_bound_term })
}

/// Second moments of the `(X, Y)` joint used by the closed-form gradient.
#[derive(Debug, Clone)]
struct Moments {
    sx: DMatrix<f64>,
    sy: DMatrix<f64>,
    sxy: DMatrix<f64>,
    h_y: f64,
}

impl Moments {
    fn new(joint: &GaussianJoint) -> Result<Self> {
        Ok(Self {
            sx: joint.block_cov(&["X"])?,
            sy: joint.block_cov(&["Y"])?,
            sxy: joint.cross_cov(&["X"], &["Y"])?,
            h_y: joint.entropy(&["Y"])?,
        })
    }

    /// Objective and gradient with respect to the flat parameter vector.
    fn objective_and_grad(&self, p: &LinearDvibParams, beta: f64) -> (f64, LinearDvibParams) {
        let a = &p.enc_weight;
        let b = &p.dec_weight;
        let psi = p.enc_logvar.map(clamp_exp);
        let dvar = p.dec_logvar.map(clamp_exp);
        let s_t = a * &self.sx * a.transpose() + DMatrix::from_diagonal(&psi);
        let Some(f_t) = nalgebra::Cholesky::new(linalg::symmetrize(&s_t)) else {
            return (f64::INFINITY, p.clone());
        };
        let s_t_inv = f_t.inverse();
        let i_xt = 0.5 * (log_det_factor(&f_t) - psi.map(f64::ln).sum());

        let c = a * &self.sxy;
        let bc = b * &c;
        let e = &self.sy - &bc - bc.transpose() + b * &s_t * b.transpose();
        let dinv = dvar.map(|v| 1.0 / v);
        let dinv_m = DMatrix::from_diagonal(&dinv);
        let dy = dvar.len() as f64;
        let fit = 0.5 * (dvar.map(f64::ln).sum() + dinv.dot(&e.diagonal()));
        let bound = -0.5 * dy * (2.0 * std::f64::consts::PI).ln() - fit + self.h_y;
        let value = i_xt - beta * bound;

        let k = b.transpose() * &dinv_m * b;
        let g_a = &s_t_inv * a * &self.sx
            + (-(b.transpose() * &dinv_m * self.sxy.transpose()) + &k * a * &self.sx) * beta;
        let g_u = DVector::from_fn(psi.len(), |i, _| {
            let d_psi = 0.5 * s_t_inv[(i, i)] + 0.5 * beta * k[(i, i)];
            d_psi * clamp_exp_grad(p.enc_logvar[i]) - 0.5 * f64::from(in_range(p.enc_logvar[i]))
        });
        let g_b = (&dinv_m * (b * &s_t - c.transpose())) * beta;
        let g_w = DVector::from_fn(dvar.len(), |i, _| {
            let d_var = 0.5 * (1.0 / dvar[i] - e[(i, i)] / (dvar[i] * dvar[i]));
            beta * d_var * clamp_exp_grad(p.dec_logvar[i])
        });
        let grad = LinearDvibParams { enc_weight: g_a, enc_logvar: g_u, dec_weight: g_b, dec_logvar: g_w };
        (value, grad)
    }
}

fn in_range(v: f64) -> bool {
    (MIN_LOG_VAR..=MAX_LOG_VAR).contains(&v)
}

/// Closed-form objective value and its gradient in parameter form.
pub fn dvib_objective_and_grad(
    params: &LinearDvibParams,
    joint: &GaussianJoint,
    beta: f64,
) -> Result<(f64, LinearDvibParams)> {
    let m = Moments::new(joint)?;
    params.check(m.sx.nrows(), m.sy.nrows())?;
    Ok(m.objective_and_grad(params, beta))
}

#[derive(Debug, Clone, Copy)]
pub struct DvibOptions {
    pub lr: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DvibOptions {
    fn default() -> Self {
        Self { lr: 1.0, tol: 1e-13, max_iter: 100_000 }
    }
}

#[derive(Debug, Clone)]
pub struct DvibTrained {
    pub params: LinearDvibParams,
    pub objective: DvibValue,
    /// Accepted objective values.
    pub trace: Vec<f64>,
    pub converged: bool,
    /// Max-norm gap between analytic and central-difference gradients at the
    /// initial and at the returned parameters.
    pub fd_error_init: f64,
    pub fd_error_final: f64,
}

/// Seeded initial parameters: small Gaussian weights, unit encoder noise and
/// the marginal variances of `Y` for the decoder noise.
pub fn dvib_init(joint: &GaussianJoint, t_dim: usize, seed: u64) -> Result<LinearDvibParams> {
    let dx = joint.block_dim("X")?;
    let sy = joint.block_cov(&["Y"])?;
    let dy = sy.nrows();
    let mut r = rng::stream(seed, 0);
    Ok(LinearDvibParams {
        enc_weight: rng::normal_matrix(&mut r, t_dim, dx) * 0.5,
        enc_logvar: DVector::zeros(t_dim),
        dec_weight: rng::normal_matrix(&mut r, dy, t_dim) * 0.1,
        dec_logvar: sy.diagonal().map(f64::ln),
    })
}

/// Gradient descent with backtracking from a seeded initialisation.
pub fn dvib_train(
    joint: &GaussianJoint,
    beta: f64,
    t_dim: usize,
    seed: u64,
    opts: DvibOptions,
) -> Result<DvibTrained> {
    if !(opts.lr > 0.0) {
        return Err(IbError::InvalidArgument("learning rate must be positive".into()));
    }
    if t_dim == 0 {
        return Err(IbError::InvalidArgument("t_dim must be >= 1".into()));
    }
    let m = Moments::new(joint)?;
    let (dx, dy) = (m.sx.nrows(), m.sy.nrows());
    let init = dvib_init(joint, t_dim, seed)?;
    let f = |v: &DVector<f64>| {
        let p = LinearDvibParams::from_flat(v, dx, dy, t_dim);
        let (value, g) = m.objective_and_grad(&p, beta);
        (value, g.to_flat())
    };
    let x0 = init.to_flat();
    let fd_error_init = optim::gradient_check(f, &x0, 1e-5);
    let res = optim::gradient_descent(
        f,
        x0,
        OptOptions { tol: opts.tol, grad_tol: 1e-10, max_iter: opts.max_iter, step: opts.lr },
    );
    let fd_error_final = optim::gradient_check(f, &res.x, 1e-5);
    let params = LinearDvibParams::from_flat(&res.x, dx, dy, t_dim);
    let objective = dvib_objective(&params, joint, beta)?;
    Ok(DvibTrained {
        params,
        objective,
        trace: res.trace,
        converged: res.converged,
        fd_error_init,
        fd_error_final,
    })
}

/// Per-column rank Gaussianisation `Φ⁻¹(rank / (n + 1))`, ties receiving
/// their average rank.
pub fn copula_transform(data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (n, d) = data.shape();
    if n < 2 {
        return Err(IbError::InvalidArgument("copula transform needs at least 2 rows".into()));
    }
    if let Some((row, col)) =
        (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).find(|&(i, j)| !data[(i, j)].is_finite())
    {
        return Err(IbError::NonFiniteInput { row, col });
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal parameters are valid");
    let mut out = DMatrix::zeros(n, d);
    for j in 0..d {
        let col: Vec<f64> = data.column(j).iter().copied().collect();
        if col.iter().all(|v| *v == col[0]) {
            return Err(IbError::ConstantColumn(j));
        }
        let ranks = average_ranks(&col);
        for i in 0..n {
            out[(i, j)] = normal.inverse_cdf(ranks[i] / (n as f64 + 1.0));
        }
    }
    Ok(out)
}

/// One-based ranks; tied values share the mean of their positions.
fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}
