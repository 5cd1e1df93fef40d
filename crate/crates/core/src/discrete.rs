//! The bottleneck on finite alphabets.
//!
//! Minimises `I(X;T) - β I(T;Y)` over encoders `p(t|x)` with the
//! self-consistent iteration
//!
//! ```text
//! p(t|x) ∝ p(t) · exp(-β · KL(p(y|x) || p(y|t)))
//! p(t)   = Σ_x p(x) p(t|x)
//! p(y|t) = Σ_x p(y|x) p(x|t)
//! ```
//!
//! Each round minimises the free energy `I(X;T) + β E KL(p(y|x) || p(y|t))`
//! in one argument, so the functional trace is non-increasing.
//!
//! The iteration must not start from the exactly uniform encoder: that is a
//! fixed point. The default start is uniform plus seeded noise of size 0.01.

use nalgebra::DMatrix;

use crate::error::{IbError, Result};
use crate::rng;

const SUM_TOL: f64 = 1e-12;
/// Clusters whose marginal falls below this are frozen at zero.
const DEAD_CLUSTER: f64 = 1e-300;

/// Joint pmf `p(x, y)`, rows indexed by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    pmf: DMatrix<f64>,
}

impl DiscreteJoint {
    pub fn new(pmf: DMatrix<f64>) -> Result<Self> {
        validate_pmf(&pmf)?;
        if (0..pmf.nrows()).any(|i| pmf.row(i).sum() <= 0.0) {
            return Err(IbError::InvalidPmf("a row has zero marginal".into()));
        }
        if (0..pmf.ncols()).any(|j| pmf.column(j).sum() <= 0.0) {
            return Err(IbError::InvalidPmf("a column has zero marginal".into()));
        }
        Ok(Self { pmf })
    }

    pub fn pmf(&self) -> &DMatrix<f64> {
        &self.pmf
    }

    pub fn x_card(&self) -> usize {
        self.pmf.nrows()
    }

    pub fn y_card(&self) -> usize {
        self.pmf.ncols()
    }

    pub fn p_x(&self) -> Vec<f64> {
        (0..self.x_card()).map(|i| self.pmf.row(i).sum()).collect()
    }

    /// Rows are `p(y | x)`.
    pub fn p_y_given_x(&self) -> DMatrix<f64> {
        let px = self.p_x();
        DMatrix::from_fn(self.x_card(), self.y_card(), |i, j| self.pmf[(i, j)] / px[i])
    }

    pub fn mutual_information(&self) -> f64 {
        discrete_mi(&self.pmf).expect("validated pmf")
    }

    pub fn entropy_x(&self) -> f64 {
        entropy(&self.p_x())
    }
}

/// Encoder `p(t | x)`, rows indexed by `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEncoder {
    pmf: DMatrix<f64>,
}

impl DiscreteEncoder {
    pub fn new(pmf: DMatrix<f64>) -> Result<Self> {
        if pmf.ncols() == 0 || pmf.nrows() == 0 {
            return Err(IbError::InvalidPmf("encoder must be nonempty".into()));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(IbError::InvalidPmf("encoder entries must be finite and >= 0".into()));
        }
        for i in 0..pmf.nrows() {
            let s = pmf.row(i).sum();
            if (s - 1.0).abs() > SUM_TOL {
                return Err(IbError::InvalidPmf(format!("encoder row {i} sums to {s}")));
            }
        }
        Ok(Self { pmf })
    }

    /// Uniform rows perturbed by seeded noise of magnitude 0.01.
    pub fn perturbed_uniform(x_card: usize, t_card: usize, seed: u64) -> Self {
        let mut rng = rng::stream(seed, 0);
        let mut pmf = DMatrix::from_fn(x_card, t_card, |_, _| {
            1.0 / t_card as f64 + rng::uniform(&mut rng, -0.01, 0.01)
        });
        for mut row in pmf.row_iter_mut() {
            let s = row.sum();
            row /= s;
        }
        Self { pmf }
    }

    /// `p(t|x) = 1` for `t = x`.
    pub fn identity(card: usize) -> Self {
        Self { pmf: DMatrix::identity(card, card) }
    }

    pub fn pmf(&self) -> &DMatrix<f64> {
        &self.pmf
    }

    pub fn t_card(&self) -> usize {
        self.pmf.ncols()
    }
}

fn validate_pmf(pmf: &DMatrix<f64>) -> Result<()> {
    if pmf.is_empty() {
        return Err(IbError::InvalidPmf("empty pmf".into()));
    }
    if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(IbError::InvalidPmf("entries must be finite and >= 0".into()));
    }
    let s = pmf.sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(IbError::InvalidPmf(format!("entries sum to {s}")));
    }
    Ok(())
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|v| **v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Mutual information of a joint pmf over two finite variables, with
/// `0 ln 0 = 0`.
pub fn discrete_mi(pmf: &DMatrix<f64>) -> Result<f64> {
    validate_pmf(pmf)?;
    let pa: Vec<f64> = (0..pmf.nrows()).map(|i| pmf.row(i).sum()).collect();
    let pb: Vec<f64> = (0..pmf.ncols()).map(|j| pmf.column(j).sum()).collect();
    let mut mi = 0.0;
    for i in 0..pmf.nrows() {
        for j in 0..pmf.ncols() {
            let p = pmf[(i, j)];
            if p > 0.0 {
                mi += p * (p / (pa[i] * pb[j])).ln();
            }
        }
    }
    Ok(mi.max(0.0))
}

/// `p(x, t) = p(x) p(t|x)`.
fn joint_xt(joint: &DiscreteJoint, enc: &DiscreteEncoder) -> DMatrix<f64> {
    let px = joint.p_x();
    DMatrix::from_fn(joint.x_card(), enc.t_card(), |i, t| px[i] * enc.pmf[(i, t)])
}

/// `p(t, y) = Σ_x p(x, y) p(t|x)`, which builds in `T - X - Y`.
fn joint_ty(joint: &DiscreteJoint, enc: &DiscreteEncoder) -> DMatrix<f64> {
    enc.pmf.transpose() * &joint.pmf
}

/// `(I(X;T), I(T;Y))` for an encoder.
pub fn information_pair(joint: &DiscreteJoint, enc: &DiscreteEncoder) -> Result<(f64, f64)> {
    check_shapes(joint, enc)?;
    Ok((
        discrete_mi_unchecked(&joint_xt(joint, enc)),
        discrete_mi_unchecked(&joint_ty(joint, enc)),
    ))
}

// Induced joints sum to one only up to rounding; skip the validation there.
fn discrete_mi_unchecked(pmf: &DMatrix<f64>) -> f64 {
    let total = pmf.sum();
    let normalised = pmf / total;
    discrete_mi(&normalised).unwrap_or(0.0)
}

pub fn ib_functional(joint: &DiscreteJoint, enc: &DiscreteEncoder, beta: f64) -> Result<f64> {
    if !(beta >= 0.0) {
        return Err(IbError::InvalidArgument(format!("beta must be >= 0, got {beta}")));
    }
    let (i_xt, i_ty) = information_pair(joint, enc)?;
    Ok(i_xt - beta * i_ty)
}

fn check_shapes(joint: &DiscreteJoint, enc: &DiscreteEncoder) -> Result<()> {
    if enc.pmf.nrows() != joint.x_card() {
        return Err(IbError::DimensionMismatch(format!(
            "encoder has {} rows but |X| = {}",
            enc.pmf.nrows(),
            joint.x_card()
        )));
    }
    Ok(())
}

/// Starting point for [`ba_solve`].
#[derive(Debug, Clone)]
pub enum EncoderInit {
    Encoder(DiscreteEncoder),
    Seed(u64),
}

#[derive(Debug, Clone, Copy)]
pub struct BaOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BaOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone)]
pub struct BaResult {
    pub encoder: DiscreteEncoder,
    /// Functional value at the start and after every round.
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl BaResult {
    pub fn functional(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// One self-consistent update of the encoder.
fn ba_step(joint: &DiscreteJoint, enc: &DiscreteEncoder, beta: f64) -> DiscreteEncoder {
    let py_x = joint.p_y_given_x();
    let pxt = joint_xt(joint, enc);
    let t_card = enc.t_card();
    let pt: Vec<f64> = (0..t_card).map(|t| pxt.column(t).sum()).collect();
    let alive: Vec<bool> = pt.iter().map(|p| *p > DEAD_CLUSTER).collect();
    // p(y|t) = Σ_x p(x,t) p(y|x) / p(t)
    let pty = pxt.transpose() * &py_x;
    let py_t = DMatrix::from_fn(t_card, joint.y_card(), |t, y| {
        if alive[t] {
            pty[(t, y)] / pt[t]
        } else {
            0.0
        }
    });

    let mut next = DMatrix::zeros(joint.x_card(), t_card);
    for x in 0..joint.x_card() {
        let logits: Vec<f64> = (0..t_card)
            .map(|t| {
                if !alive[t] {
                    return f64::NEG_INFINITY;
                }
                let mut kl = 0.0;
                for y in 0..joint.y_card() {
                    let p = py_x[(x, y)];
                    if p > 0.0 {
                        let q = py_t[(t, y)];
                        if q <= 0.0 {
                            return f64::NEG_INFINITY;
                        }
                        kl += p * (p / q).ln();
                    }
                }
                pt[t].ln() - beta * kl
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = weights.iter().sum();
        for t in 0..t_card {
            next[(x, t)] = weights[t] / z;
        }
    }
    DiscreteEncoder { pmf: next }
}

pub fn ba_solve(
    joint: &DiscreteJoint,
    t_card: usize,
    beta: f64,
    init: EncoderInit,
    opts: BaOptions,
) -> Result<BaResult> {
    if t_card == 0 {
        return Err(IbError::InvalidArgument("t_card must be >= 1".into()));
    }
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(IbError::InvalidArgument("need tol > 0 and max_iter >= 1".into()));
    }
    let mut enc = match init {
        EncoderInit::Encoder(e) => e,
        EncoderInit::Seed(seed) => DiscreteEncoder::perturbed_uniform(joint.x_card(), t_card, seed),
    };
    if enc.t_card() != t_card {
        return Err(IbError::DimensionMismatch(format!(
            "initial encoder has {} clusters, expected {t_card}",
            enc.t_card()
        )));
    }
    let mut trace = vec![ib_functional(joint, &enc, beta)?];
    let mut converged = false;
    for _ in 0..opts.max_iter {
        enc = ba_step(joint, &enc, beta);
        let f = ib_functional(joint, &enc, beta)?;
        let prev = *trace.last().expect("nonempty trace");
        trace.push(f);
        if (prev - f).abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(BaResult { encoder: enc, trace, converged })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub beta: f64,
    pub i_xt: f64,
    pub i_ty: f64,
    pub converged: bool,
}

/// One solve per β, each warm-started from the previous β's encoder when
/// `warm_start` is set.
pub fn info_curve_discrete(
    joint: &DiscreteJoint,
    t_card: usize,
    betas: &[f64],
    seed: u64,
    opts: BaOptions,
    warm_start: bool,
) -> Result<Vec<CurvePoint>> {
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(IbError::InvalidArgument("betas must be sorted ascending".into()));
    }
    let mut out = Vec::with_capacity(betas.len());
    let mut previous: Option<DiscreteEncoder> = None;
    for &beta in betas {
        // a collapsed warm start is a fixed point; re-perturb it
        let init = match previous.take() {
            Some(enc) if warm_start => EncoderInit::Encoder(reperturb(enc, seed)),
            _ => EncoderInit::Seed(seed),
        };
        let res = ba_solve(joint, t_card, beta, init, opts)?;
        let (i_xt, i_ty) = information_pair(joint, &res.encoder)?;
        out.push(CurvePoint { beta, i_xt, i_ty, converged: res.converged });
        previous = Some(res.encoder);
    }
    Ok(out)
}

fn reperturb(enc: DiscreteEncoder, seed: u64) -> DiscreteEncoder {
    let noise = DiscreteEncoder::perturbed_uniform(enc.pmf.nrows(), enc.t_card(), seed);
    let mut pmf = enc.pmf * 0.99 + noise.pmf * 0.01;
    for mut row in pmf.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    DiscreteEncoder { pmf }
}
