//! Closed-form information quantities for zero-mean multivariate normals.
//!
//! A [`GaussianJoint`] is a covariance matrix partitioned into named blocks
//! (typically `X`, `Y`, `T`). Every quantity is in nats. Means are fixed at
//! zero: all information measures here are mean-invariant.
//!
//! The conditional counterparts (`conditional_mutual_information`,
//! `conditional_lautum`) use the fact that for jointly Gaussian variables the
//! conditional covariance does not depend on the value conditioned on, so the
//! average over the conditioning variable collapses to a single
//! covariance-only expression. The general averaged definition lives in the
//! discrete decomposition oracle.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::linalg::{self, block_diag, cholesky_conditioning, gaussian_kl, log_det_pd, select};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = -1e-10;

/// A named block of coordinates inside a joint covariance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub name: String,
    pub dim: usize,
}

/// Zero-mean normal over an ordered list of named blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointDoc", into = "JointDoc")]
pub struct GaussianJoint {
    blocks: Vec<Block>,
    cov: DMatrix<f64>,
}

/// Conditional distribution of a target block given a conditioning block:
/// mean `regression * given`, covariance `cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianConditional {
    pub regression: DMatrix<f64>,
    pub cov: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct JointDoc {
    blocks: Vec<(String, usize)>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<JointDoc> for GaussianJoint {
    type Error = IbError;

    fn try_from(doc: JointDoc) -> Result<Self> {
        let n = doc.cov.len();
        if doc.cov.iter().any(|row| row.len() != n) {
            return Err(IbError::InvalidCovariance("covariance must be square".into()));
        }
        let cov = DMatrix::from_fn(n, n, |i, j| doc.cov[i][j]);
        GaussianJoint::new(doc.blocks, cov)
    }
}

impl From<GaussianJoint> for JointDoc {
    fn from(joint: GaussianJoint) -> Self {
        let n = joint.cov.nrows();
        JointDoc {
            blocks: joint.blocks.into_iter().map(|b| (b.name, b.dim)).collect(),
            cov: (0..n)
                .map(|i| (0..n).map(|j| joint.cov[(i, j)]).collect())
                .collect(),
        }
    }
}

impl GaussianJoint {
    pub fn new<S: Into<String>>(blocks: Vec<(S, usize)>, cov: DMatrix<f64>) -> Result<Self> {
        let blocks: Vec<Block> = blocks
            .into_iter()
            .map(|(name, dim)| Block { name: name.into(), dim })
            .collect();
        for (i, b) in blocks.iter().enumerate() {
            if b.dim == 0 {
                return Err(IbError::InvalidCovariance(format!("block `{}` is empty", b.name)));
            }
            if blocks[..i].iter().any(|o| o.name == b.name) {
                return Err(IbError::InvalidCovariance(format!("duplicate block `{}`", b.name)));
            }
        }
        let total: usize = blocks.iter().map(|b| b.dim).sum();
        if cov.nrows() != total || cov.ncols() != total {
            return Err(IbError::InvalidCovariance(format!(
                "blocks sum to {total} but covariance is {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(IbError::InvalidCovariance("non-finite entry".into()));
        }
        for i in 0..total {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(IbError::InvalidCovariance(format!(
                        "not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let lambda = linalg::min_eigenvalue(&cov);
        if lambda < PSD_TOL {
            return Err(IbError::InvalidCovariance(format!(
                "not positive semidefinite (min eigenvalue {lambda:e})"
            )));
        }
        Ok(Self { blocks, cov })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn has_block(&self, name: &str) -> bool {
        self.blocks.iter().any(|b| b.name == name)
    }

    pub fn block_dim(&self, name: &str) -> Result<usize> {
        self.blocks
            .iter()
            .find(|b| b.name == name)
            .map(|b| b.dim)
            .ok_or_else(|| IbError::UnknownBlock(name.to_string()))
    }

    /// Coordinate indices of the given blocks, in the order the names are listed.
    pub fn indices(&self, names: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for name in names {
            let mut offset = 0;
            let mut found = false;
            for b in &self.blocks {
                if b.name == *name {
                    out.extend(offset..offset + b.dim);
                    found = true;
                    break;
                }
                offset += b.dim;
            }
            if !found {
                return Err(IbError::UnknownBlock(name.to_string()));
            }
        }
        Ok(out)
    }

    /// Covariance between two lists of blocks.
    pub fn cross_cov(&self, a: &[&str], b: &[&str]) -> Result<DMatrix<f64>> {
        Ok(select(&self.cov, &self.indices(a)?, &self.indices(b)?))
    }

    pub fn block_cov(&self, names: &[&str]) -> Result<DMatrix<f64>> {
        self.cross_cov(names, names)
    }

    /// Marginal joint over the listed blocks, in the listed order.
    pub fn marginal(&self, names: &[&str]) -> Result<GaussianJoint> {
        let blocks = names
            .iter()
            .map(|n| Ok((n.to_string(), self.block_dim(n)?)))
            .collect::<Result<Vec<_>>>()?;
        GaussianJoint::new(blocks, self.block_cov(names)?)
    }

    /// The joint over `a ∪ b` in which `a` and `b` are made independent while
    /// keeping their marginals.
    pub fn independent_product(&self, a: &[&str], b: &[&str]) -> Result<GaussianJoint> {
        check_disjoint(a, b)?;
        let blocks = a
            .iter()
            .chain(b)
            .map(|n| Ok((n.to_string(), self.block_dim(n)?)))
            .collect::<Result<Vec<_>>>()?;
        GaussianJoint::new(blocks, block_diag(&self.block_cov(a)?, &self.block_cov(b)?))
    }

    pub fn conditional(&self, target: &[&str], given: &[&str]) -> Result<GaussianConditional> {
        if target.is_empty() || given.is_empty() {
            return Err(IbError::InvalidArgument(
                "conditional needs nonempty target and conditioning blocks".into(),
            ));
        }
        check_disjoint(target, given)?;
        let s_tt = self.block_cov(target)?;
        let s_tg = self.cross_cov(target, given)?;
        let factor = cholesky_conditioning(&self.block_cov(given)?)?;
        // regression = Σ_tg Σ_g⁻¹, computed as (Σ_g⁻¹ Σ_gt)ᵀ
        let regression = factor.solve(&s_tg.transpose()).transpose();
        let cov = linalg::symmetrize(&(s_tt - &regression * s_tg.transpose()));
        Ok(GaussianConditional { regression, cov })
    }

    /// Covariance of `target` given `given`; the plain marginal covariance when
    /// `given` is empty.
    pub fn conditional_cov(&self, target: &[&str], given: &[&str]) -> Result<DMatrix<f64>> {
        if given.is_empty() {
            self.block_cov(target)
        } else {
            Ok(self.conditional(target, given)?.cov)
        }
    }

    pub fn entropy(&self, names: &[&str]) -> Result<f64> {
        differential_entropy(&self.block_cov(names)?)
    }

    /// `H(a | given)` from the conditional covariance.
    pub fn conditional_entropy(&self, a: &[&str], given: &[&str]) -> Result<f64> {
        differential_entropy(&self.conditional_cov(a, given)?)
    }

    /// `I(a; b) = H(a) - H(a | b)`.
    pub fn mutual_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        check_disjoint(a, b)?;
        let h_a = log_det_pd(&self.block_cov(a)?, "marginal covariance")?;
        log_det_pd(&self.block_cov(b)?, "marginal covariance")?;
        let h_a_b = log_det_pd(&self.conditional(a, b)?.cov, "conditional covariance")?;
        Ok(0.5 * (h_a - h_a_b))
    }

    /// Lautum information `KL(P(a)P(b) || P(a, b))`.
    pub fn lautum_information(&self, a: &[&str], b: &[&str]) -> Result<f64> {
        check_disjoint(a, b)?;
        let joint = self.block_cov(&concat(a, b))?;
        let product = block_diag(&self.block_cov(a)?, &self.block_cov(b)?);
        gaussian_kl(&product, &joint)
    }

    /// `I(a; b | given)`; reduces to the unconditional value for empty `given`.
    pub fn conditional_mutual_information(
        &self,
        a: &[&str],
        b: &[&str],
        given: &[&str],
    ) -> Result<f64> {
        check_disjoint(a, b)?;
        check_disjoint(a, given)?;
        check_disjoint(b, given)?;
        let ab = self.conditional_cov(&concat(a, b), given)?;
        let na = self.indices(a)?.len();
        let nb = ab.nrows() - na;
        let s_a = ab.view((0, 0), (na, na)).into_owned();
        let s_b = ab.view((na, na), (nb, nb)).into_owned();
        Ok(0.5
            * (log_det_pd(&s_a, "conditional covariance")?
                + log_det_pd(&s_b, "conditional covariance")?
                - log_det_pd(&ab, "joint conditional covariance")?))
    }

    /// `L(a; b | given)`: KL from the product of the conditionals to the joint
    /// conditional. Both conditionals share their means, so this is a
    /// covariance-only KL.
    pub fn conditional_lautum(&self, a: &[&str], b: &[&str], given: &[&str]) -> Result<f64> {
        check_disjoint(a, b)?;
        check_disjoint(a, given)?;
        check_disjoint(b, given)?;
        let ab = self.conditional_cov(&concat(a, b), given)?;
        let na = self.indices(a)?.len();
        let nb = ab.nrows() - na;
        let product = block_diag(
            &ab.view((0, 0), (na, na)).into_owned(),
            &ab.view((na, na), (nb, nb)).into_owned(),
        );
        gaussian_kl(&product, &ab)
    }
}

/// `½ ln((2πe)^n |Σ|)`.
pub fn differential_entropy(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows() as f64;
    Ok(0.5 * (n * (2.0 * PI * E).ln() + log_det_pd(cov, "covariance")?))
}

/// `E log P_dec(Y | T)` when `(Y, T)` has the second moments of `coupling` and
/// the decoder is `N(regression · t, cov)`.
///
/// The expectation of the quadratic form is evaluated exactly:
/// `E (Y - RT)(Y - RT)ᵀ = Σ_Y - R Σ_TY - Σ_YT Rᵀ + R Σ_T Rᵀ`.
pub fn expected_log_density(
    coupling: &GaussianJoint,
    y: &[&str],
    t: &[&str],
    decoder: &GaussianConditional,
) -> Result<f64> {
    let s_yy = coupling.block_cov(y)?;
    let s_tt = coupling.block_cov(t)?;
    let s_ty = coupling.cross_cov(t, y)?;
    let r = &decoder.regression;
    if r.nrows() != s_yy.nrows() || r.ncols() != s_tt.nrows() {
        return Err(IbError::DimensionMismatch(format!(
            "decoder regression is {}x{}, coupling has dim Y = {}, dim T = {}",
            r.nrows(),
            r.ncols(),
            s_yy.nrows(),
            s_tt.nrows()
        )));
    }
    let r_s_ty = r * &s_ty;
    let resid = &s_yy - &r_s_ty - r_s_ty.transpose() + r * &s_tt * r.transpose();
    let factor = linalg::cholesky_pd(&decoder.cov, "decoder covariance")?;
    let n = s_yy.nrows() as f64;
    Ok(-0.5
        * (n * (2.0 * PI).ln() + linalg::log_det_factor(&factor) + factor.solve(&resid).trace()))
}

fn concat<'a>(a: &[&'a str], b: &[&'a str]) -> Vec<&'a str> {
    a.iter().chain(b).copied().collect()
}

fn check_disjoint(a: &[&str], b: &[&str]) -> Result<()> {
    if let Some(shared) = a.iter().find(|n| b.contains(n)) {
        return Err(IbError::InvalidArgument(format!(
            "block `{shared}` appears on both sides"
        )));
    }
    Ok(())
}
