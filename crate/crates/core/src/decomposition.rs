//! Exact decomposition of `I(T;Y)` into a decoder bound and two Markov
//! violation terms.
//!
//! When `X ⟂ Y | T`,
//!
//! ```text
//! I(T;Y) = E_{P(X)P(Y|X)P(T|X)} log P(Y|T) + H(Y) + I(Y;T|X) + L(Y;T|X)
//! ```
//!
//! The first two terms form `bound_term`, the quantity a variational decoder
//! optimises. `cmi + clautum` vanishes exactly when `T ⟂ Y | X`; the signed
//! `residual` vanishes when `X ⟂ Y | T`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::gaussian::{expected_log_density, GaussianConditional, GaussianJoint};
use crate::graph::{Edge, Vertex};
use crate::linalg;
use crate::sem::LinearGaussianSem;

/// Every quantity is in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub bound_term: f64,
    pub cmi: f64,
    pub clautum: f64,
    pub h_y: f64,
    pub i_ty_exact: f64,
    /// `i_ty_exact - bound_term - cmi - clautum`.
    pub residual: f64,
    /// `cmi + clautum`.
    pub txy_violation: f64,
    /// `|residual|`.
    pub xty_violation: f64,
}

impl DecompositionReport {
    fn assemble(bound_term: f64, cmi: f64, clautum: f64, h_y: f64, i_ty_exact: f64) -> Self {
        let residual = i_ty_exact - bound_term - cmi - clautum;
        Self {
            bound_term,
            cmi,
            clautum,
            h_y,
            i_ty_exact,
            residual,
            txy_violation: cmi + clautum,
            xty_violation: residual.abs(),
        }
    }
}

fn check_xyt(joint: &GaussianJoint) -> Result<()> {
    for name in ["X", "Y", "T"] {
        if !joint.has_block(name) {
            return Err(IbError::UnknownBlock(name.into()));
        }
    }
    Ok(())
}

/// Joint over `(Y, T)` in which `T` and `Y` are conditionally independent
/// given `X`: `Cov(T, Y) = Σ_TX Σ_X⁻¹ Σ_XY`.
pub fn product_coupling(joint: &GaussianJoint) -> Result<GaussianJoint> {
    check_xyt(joint)?;
    let sy = joint.block_cov(&["Y"])?;
    let st = joint.block_cov(&["T"])?;
    let fx = linalg::cholesky_pd(&joint.block_cov(&["X"])?, "covariance of X")?;
    let s_ty = joint.cross_cov(&["T"], &["X"])? * fx.solve(&joint.cross_cov(&["X"], &["Y"])?);
    let (dy, dt) = (sy.nrows(), st.nrows());
    let mut cov = DMatrix::zeros(dy + dt, dy + dt);
    cov.view_mut((0, 0), (dy, dy)).copy_from(&sy);
    cov.view_mut((dy, dy), (dt, dt)).copy_from(&st);
    cov.view_mut((dy, 0), (dt, dy)).copy_from(&s_ty);
    cov.view_mut((0, dy), (dy, dt)).copy_from(&s_ty.transpose());
    GaussianJoint::new(vec![("Y", dy), ("T", dt)], linalg::symmetrize(&cov))
}

/// Decomposition with the true conditional `P(Y|T)` as decoder.
pub fn decompose_gaussian(joint: &GaussianJoint) -> Result<DecompositionReport> {
    check_xyt(joint)?;
    linalg::cholesky_pd(joint.cov(), "joint covariance")?;
    let decoder = joint.conditional(&["Y"], &["T"])?;
    Ok(decompose_gaussian_with_decoder(joint, &decoder)?.0)
}

/// Decomposition whose bound uses an arbitrary linear-Gaussian decoder. The
/// second value is the decoder gap: the true-decoder bound minus this one.
/// Both bounds average over the product coupling, so the gap is non-negative
/// whenever `T` and `Y` are independent given `X`; otherwise the true
/// conditional need not be the best decoder for that coupling and the gap may
/// be negative.
pub fn decompose_gaussian_with_decoder(
    joint: &GaussianJoint,
    decoder: &GaussianConditional,
) -> Result<(DecompositionReport, f64)> {
    check_xyt(joint)?;
    let coupling = product_coupling(joint)?;
    let h_y = joint.entropy(&["Y"])?;
    let true_decoder = joint.conditional(&["Y"], &["T"])?;
    let true_bound = expected_log_density(&coupling, &["Y"], &["T"], &true_decoder)? + h_y;
    let bound = expected_log_density(&coupling, &["Y"], &["T"], decoder)? + h_y;
    let report = DecompositionReport::assemble(
        bound,
        joint.conditional_mutual_information(&["Y"], &["T"], &["X"])?,
        joint.conditional_lautum(&["Y"], &["T"], &["X"])?,
        h_y,
        joint.mutual_information(&["T"], &["Y"])?,
    );
    Ok((report, true_bound - bound))
}

/// Probability mass function `p(x, y, t)` on finite alphabets, stored with
/// `t` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TriplePmfDoc", into = "TriplePmfDoc")]
pub struct TriplePmf {
    shape: [usize; 3],
    p: Vec<f64>,
}

/// On-disk form: `{"p": [[[p(x0,y0,t0), ...], ...], ...]}` indexed `p[x][y][t]`.
#[derive(Serialize, Deserialize)]
struct TriplePmfDoc {
    p: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<TriplePmfDoc> for TriplePmf {
    type Error = IbError;

    fn try_from(doc: TriplePmfDoc) -> Result<Self> {
        let nx = doc.p.len();
        let ny = doc.p.first().map_or(0, Vec::len);
        let nt = doc.p.first().and_then(|r| r.first()).map_or(0, Vec::len);
        if doc.p.iter().any(|r| r.len() != ny || r.iter().any(|c| c.len() != nt)) {
            return Err(IbError::InvalidPmf("array is ragged".into()));
        }
        let flat = doc.p.into_iter().flatten().flatten().collect();
        TriplePmf::new([nx, ny, nt], flat)
    }
}

impl From<TriplePmf> for TriplePmfDoc {
    fn from(pmf: TriplePmf) -> Self {
        let [nx, ny, nt] = pmf.shape;
        let p = (0..nx)
            .map(|x| (0..ny).map(|y| (0..nt).map(|t| pmf.get(x, y, t)).collect()).collect())
            .collect();
        TriplePmfDoc { p }
    }
}

const PMF_SUM_TOL: f64 = 1e-9;

impl TriplePmf {
    /// Checks shape, finiteness, non-negativity and total mass within 1e-9.
    pub fn new(shape: [usize; 3], p: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(IbError::InvalidPmf("every alphabet must be nonempty".into()));
        }
        if p.len() != shape.iter().product::<usize>() {
            return Err(IbError::InvalidPmf(format!(
                "{} entries for shape {shape:?}",
                p.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(IbError::InvalidPmf(format!("entry {v} is not a probability")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PMF_SUM_TOL {
            return Err(IbError::InvalidPmf(format!("entries sum to {total}")));
        }
        Ok(Self { shape, p })
    }

    /// Builds `p(x) p(t|x) p(y|t)` when `t_given_x` is indexed `[x][t]` and
    /// `y_given_t` is indexed `[t][y]`.
    pub fn chain_xty(p_x: &[f64], t_given_x: &DMatrix<f64>, y_given_t: &DMatrix<f64>) -> Result<Self> {
        let (nx, nt, ny) = (p_x.len(), t_given_x.ncols(), y_given_t.ncols());
        let mut p = Vec::with_capacity(nx * ny * nt);
        for x in 0..nx {
            for y in 0..ny {
                for t in 0..nt {
                    p.push(p_x[x] * t_given_x[(x, t)] * y_given_t[(t, y)]);
                }
            }
        }
        Self::new([nx, ny, nt], p)
    }

    /// Builds `p(x) p(y|x) p(t|x)` when both conditionals are indexed by `x`
    /// in rows.
    pub fn fork(p_x: &[f64], y_given_x: &DMatrix<f64>, t_given_x: &DMatrix<f64>) -> Result<Self> {
        let (nx, ny, nt) = (p_x.len(), y_given_x.ncols(), t_given_x.ncols());
        let mut p = Vec::with_capacity(nx * ny * nt);
        for x in 0..nx {
            for y in 0..ny {
                for t in 0..nt {
                    p.push(p_x[x] * y_given_x[(x, y)] * t_given_x[(x, t)]);
                }
            }
        }
        Self::new([nx, ny, nt], p)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        let [_, ny, nt] = self.shape;
        self.p[(x * ny + y) * nt + t]
    }

    /// Adds `eps` to every entry and renormalises.
    pub fn smoothed(&self, eps: f64) -> Self {
        let total: f64 = self.p.iter().map(|v| v + eps).sum();
        Self { shape: self.shape, p: self.p.iter().map(|v| (v + eps) / total).collect() }
    }
}

/// Default smoothing mass for pmfs with zero entries.
pub const SMOOTHING: f64 = 1e-9;

/// Marginals and conditionals of a strictly positive pmf.
struct Tables {
    shape: [usize; 3],
    p: Vec<f64>,
    p_x: Vec<f64>,
    p_y: Vec<f64>,
    p_t: Vec<f64>,
    p_xy: DMatrix<f64>,
    p_xt: DMatrix<f64>,
    p_yt: DMatrix<f64>,
}

impl Tables {
    fn new(pmf: &TriplePmf) -> Result<Self> {
        let [nx, ny, nt] = pmf.shape;
        if let Some(i) = pmf.p.iter().position(|v| *v <= 0.0) {
            let (x, y, t) = (i / (ny * nt), (i / nt) % ny, i % nt);
            return Err(IbError::ZeroProbability(format!(
                "p(x={x}, y={y}, t={t}) = 0; enable smoothing to decompose"
            )));
        }
        let mut p_xy = DMatrix::zeros(nx, ny);
        let mut p_xt = DMatrix::zeros(nx, nt);
        let mut p_yt = DMatrix::zeros(ny, nt);
        for x in 0..nx {
            for y in 0..ny {
                for t in 0..nt {
                    let v = pmf.get(x, y, t);
                    p_xy[(x, y)] += v;
                    p_xt[(x, t)] += v;
                    p_yt[(y, t)] += v;
                }
            }
        }
        Ok(Self {
            shape: pmf.shape,
            p: pmf.p.clone(),
            p_x: (0..nx).map(|x| p_xy.row(x).sum()).collect(),
            p_y: (0..ny).map(|y| p_xy.column(y).sum()).collect(),
            p_t: (0..nt).map(|t| p_xt.column(t).sum()).collect(),
            p_xy,
            p_xt,
            p_yt,
        })
    }

    fn get(&self, x: usize, y: usize, t: usize) -> f64 {
        let [_, ny, nt] = self.shape;
        self.p[(x * ny + y) * nt + t]
    }
}

/// Decomposition by exhaustive summation. Entries must be strictly positive;
/// pass `smoothing = Some(eps)` to add `eps` to every entry first.
pub fn decompose_discrete(pmf: &TriplePmf, smoothing: Option<f64>) -> Result<DecompositionReport> {
    let pmf = match smoothing {
        Some(eps) if eps > 0.0 => pmf.smoothed(eps),
        Some(eps) => {
            return Err(IbError::InvalidArgument(format!("smoothing mass {eps} must be positive")))
        }
        None => pmf.clone(),
    };
    let tb = Tables::new(&pmf)?;
    let [nx, ny, nt] = tb.shape;
    let h_y = -tb.p_y.iter().map(|p| p * p.ln()).sum::<f64>();
    let mut i_ty = 0.0;
    for y in 0..ny {
        for t in 0..nt {
            let v = tb.p_yt[(y, t)];
            i_ty += v * (v / (tb.p_y[y] * tb.p_t[t])).ln();
        }
    }
    let (mut cmi, mut clautum, mut expected) = (0.0, 0.0, 0.0);
    for x in 0..nx {
        let px = tb.p_x[x];
        for y in 0..ny {
            let py_x = tb.p_xy[(x, y)] / px;
            for t in 0..nt {
                let pt_x = tb.p_xt[(x, t)] / px;
                let pyt_x = tb.get(x, y, t) / px;
                let prod = py_x * pt_x;
                cmi += px * pyt_x * (pyt_x / prod).ln();
                clautum += px * prod * (prod / pyt_x).ln();
                expected += px * prod * (tb.p_yt[(y, t)] / tb.p_t[t]).ln();
            }
        }
    }
    Ok(DecompositionReport::assemble(expected + h_y, cmi, clautum, h_y, i_ty))
}

/// For each value `x`, the gap of the conditional identity
/// `E_{P(T,Y|x)} log P(Y|T,x) = E_{P(T|x)P(Y|x)} log P(Y|T,x) + KL(P(T,Y|x) || P(T|x)P(Y|x)) + KL(P(T|x)P(Y|x) || P(T,Y|x))`,
/// left side minus right side.
pub fn conditional_identity_gaps(pmf: &TriplePmf) -> Result<Vec<f64>> {
    let tb = Tables::new(pmf)?;
    let [nx, ny, nt] = tb.shape;
    Ok((0..nx)
        .map(|x| {
            let px = tb.p_x[x];
            let (mut lhs, mut prod_term, mut kl_joint, mut kl_prod) = (0.0, 0.0, 0.0, 0.0);
            for y in 0..ny {
                let py_x = tb.p_xy[(x, y)] / px;
                for t in 0..nt {
                    let pt_x = tb.p_xt[(x, t)] / px;
                    let pyt_x = tb.get(x, y, t) / px;
                    let prod = py_x * pt_x;
                    let log_y_given_tx = (pyt_x / pt_x).ln();
                    lhs += pyt_x * log_y_given_tx;
                    prod_term += prod * log_y_given_tx;
                    kl_joint += pyt_x * (pyt_x / prod).ln();
                    kl_prod += prod * (prod / pyt_x).ln();
                }
            }
            lhs - (prod_term + kl_joint + kl_prod)
        })
        .collect())
}

/// Discretisation of a joint with one-dimensional `X`, `Y`, `T` on a grid of
/// `points` per axis spanning `±half_width` marginal standard deviations;
/// masses are proportional to the density at the grid nodes.
pub fn discretize_gaussian(joint: &GaussianJoint, points: usize, half_width: f64) -> Result<TriplePmf> {
    check_xyt(joint)?;
    for name in ["X", "Y", "T"] {
        if joint.block_dim(name)? != 1 {
            return Err(IbError::DimensionMismatch(format!("block {name} must be one-dimensional")));
        }
    }
    if points < 2 {
        return Err(IbError::InvalidArgument("need at least 2 grid points per axis".into()));
    }
    let cov = joint.block_cov(&["X", "Y", "T"])?;
    let prec = linalg::inverse_pd(&cov, "joint covariance")?;
    let axis = |i: usize| -> Vec<f64> {
        let sd = cov[(i, i)].sqrt();
        (0..points)
            .map(|k| sd * half_width * (2.0 * k as f64 / (points - 1) as f64 - 1.0))
            .collect()
    };
    let (gx, gy, gt) = (axis(0), axis(1), axis(2));
    let mut p = Vec::with_capacity(points.pow(3));
    for &x in &gx {
        for &y in &gy {
            for &t in &gt {
                let v = [x, y, t];
                let q: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| v[i] * prec[(i, j)] * v[j]).sum();
                p.push((-0.5 * q).exp());
            }
        }
    }
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    TriplePmf::new([points; 3], p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileRow {
    pub param: f64,
    pub txy_violation: f64,
    pub xty_violation: f64,
    pub i_ty_exact: f64,
}

/// Sweeps the coefficient of `edge`, set to `param` in every entry, and
/// decomposes the resulting joint at each grid value.
pub fn violation_profile(sem: &LinearGaussianSem, edge: Edge, grid: &[f64]) -> Result<Vec<ProfileRow>> {
    let (from, to): (Vertex, Vertex) = edge;
    grid.iter()
        .map(|&param| {
            let coeff = DMatrix::from_element(sem.dim(to), sem.dim(from), param);
            let report = decompose_gaussian(&sem.with_coeff(edge, coeff)?.build_joint()?)?;
            Ok(ProfileRow {
                param,
                txy_violation: report.txy_violation,
                xty_violation: report.xty_violation,
                i_ty_exact: report.i_ty_exact,
            })
        })
        .collect()
}
