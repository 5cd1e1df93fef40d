//! Seeded Monte-Carlo estimators for the closed-form quantities.
//!
//! Each estimator draws from the stream `rng::stream(seed, 0)`, averages a
//! log-density ratio evaluated in closed form and reports the standard error
//! `sample_std / √n`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::discrete::DiscreteJoint;
use crate::error::{IbError, Result};
use crate::gaussian::{GaussianConditional, GaussianJoint};
use crate::linalg::{self, Factor};
use crate::rng::{self, Rng};

pub const DEFAULT_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    fn from_samples(samples: &[f64], seed: u64) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self { value: mean, std_error: (var / n as f64).sqrt(), n, seed }
    }

    fn shifted(self, by: f64) -> Self {
        Self { value: self.value + by, ..self }
    }

    /// `|value - target| <= k · std_error`, with a floating-point allowance
    /// for estimates whose integrand is identically constant.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error + 1e-12 * (1.0 + target.abs())
    }
}

/// Distribution handed to [`mc_kl`].
#[derive(Debug, Clone, Copy)]
pub enum McDistribution<'a> {
    Gaussian(&'a GaussianJoint),
    Discrete(&'a DiscreteJoint),
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(IbError::InvalidArgument("Monte-Carlo needs at least 2 samples".into()));
    }
    Ok(())
}

/// Zero-mean normal density evaluator on a subset of coordinates.
struct Density {
    idx: Vec<usize>,
    factor: Factor,
    zero: DVector<f64>,
}

impl Density {
    fn new(cov: &DMatrix<f64>, idx: Vec<usize>) -> Result<Self> {
        let sub = linalg::select(cov, &idx, &idx);
        let factor = linalg::cholesky_pd(&sub, "marginal covariance")?;
        Ok(Self { zero: DVector::zeros(idx.len()), idx, factor })
    }

    fn log_density(&self, z: &DVector<f64>) -> f64 {
        let sub = DVector::from_iterator(self.idx.len(), self.idx.iter().map(|&i| z[i]));
        linalg::gaussian_log_density(&self.factor, &self.zero, &sub)
    }
}

/// Draws `N(mean, cov)` through a Cholesky factor; a zero covariance gives the
/// mean itself.
struct Sampler {
    lower: DMatrix<f64>,
}

impl Sampler {
    fn new(cov: &DMatrix<f64>) -> Result<Self> {
        if cov.iter().all(|v| *v == 0.0) {
            return Ok(Self { lower: cov.clone() });
        }
        let f = linalg::cholesky_pd(cov, "sampling covariance")?;
        Ok(Self { lower: f.l() })
    }

    fn draw(&self, r: &mut Rng) -> DVector<f64> {
        &self.lower * rng::normal_vector(r, self.lower.nrows())
    }
}

fn gaussian_kl_samples(p: &GaussianJoint, q: &GaussianJoint, n: usize, r: &mut Rng) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..p.dim()).collect();
    let dp = Density::new(p.cov(), all.clone())?;
    let dq = Density::new(q.cov(), all)?;
    let sampler = Sampler::new(p.cov())?;
    Ok((0..n)
        .map(|_| {
            let z = sampler.draw(r);
            dp.log_density(&z) - dq.log_density(&z)
        })
        .collect())
}

/// Index of the atom whose cumulative mass first exceeds `u`.
fn draw_atom(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

fn discrete_kl_samples(p: &DiscreteJoint, q: &DiscreteJoint, n: usize, r: &mut Rng) -> Result<Vec<f64>> {
    let (pp, qq) = (p.pmf(), q.pmf());
    let cols = pp.ncols();
    // row-major atom order
    let atoms: Vec<f64> = (0..pp.len()).map(|k| pp[(k / cols, k % cols)]).collect();
    if let Some(k) = (0..atoms.len()).find(|&k| atoms[k] > 0.0 && qq[(k / cols, k % cols)] <= 0.0) {
        return Err(IbError::ZeroProbability(format!(
            "reference pmf is zero at ({}, {}) where the sampled pmf is not",
            k / cols,
            k % cols
        )));
    }
    let cdf: Vec<f64> = atoms
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok((0..n)
        .map(|_| {
            let k = draw_atom(&cdf, rng::uniform(r, 0.0, cdf[cdf.len() - 1]));
            let (i, j) = (k / cols, k % cols);
            (pp[(i, j)] / qq[(i, j)]).ln()
        })
        .collect())
}

/// `KL(p || q)` by sampling from `p`.
pub fn mc_kl(p: McDistribution, q: McDistribution, n: usize, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let mut r = rng::stream(seed, 0);
    let samples = match (p, q) {
        (McDistribution::Gaussian(p), McDistribution::Gaussian(q)) if p.dim() == q.dim() => {
            gaussian_kl_samples(p, q, n, &mut r)?
        }
        (McDistribution::Discrete(p), McDistribution::Discrete(q))
            if p.pmf().shape() == q.pmf().shape() =>
        {
            discrete_kl_samples(p, q, n, &mut r)?
        }
        _ => return Err(IbError::UnsupportedPair),
    };
    Ok(McEstimate::from_samples(&samples, seed))
}

/// `H(names) = -E log p`.
pub fn mc_entropy(joint: &GaussianJoint, names: &[&str], n: usize, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let cov = joint.block_cov(names)?;
    let d = Density::new(&cov, (0..cov.nrows()).collect())?;
    let sampler = Sampler::new(&cov)?;
    let mut r = rng::stream(seed, 0);
    let samples: Vec<f64> = (0..n).map(|_| -d.log_density(&sampler.draw(&mut r))).collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Coordinates of `names` inside the stacked vector `(a, b, given)`.
fn layout(joint: &GaussianJoint, a: &[&str], b: &[&str], given: &[&str]) -> Result<(DMatrix<f64>, [Vec<usize>; 3])> {
    let all: Vec<&str> = a.iter().chain(b).chain(given).copied().collect();
    let cov = joint.block_cov(&all)?;
    let na = joint.indices(a)?.len();
    let nb = joint.indices(b)?.len();
    let ng = cov.nrows() - na - nb;
    Ok((cov, [(0..na).collect(), (na..na + nb).collect(), (na + nb..na + nb + ng).collect()]))
}

fn concat(parts: &[&Vec<usize>]) -> Vec<usize> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Log-ratio `log p(a,b,g) p(g) / (p(a,g) p(b,g))`; with empty `g` this is
/// the pointwise mutual information.
struct PointwiseCmi {
    abg: Density,
    ag: Density,
    bg: Density,
    g: Option<Density>,
}

impl PointwiseCmi {
    fn new(cov: &DMatrix<f64>, idx: &[Vec<usize>; 3]) -> Result<Self> {
        let [a, b, g] = idx;
        Ok(Self {
            abg: Density::new(cov, concat(&[a, b, g]))?,
            ag: Density::new(cov, concat(&[a, g]))?,
            bg: Density::new(cov, concat(&[b, g]))?,
            g: if g.is_empty() { None } else { Some(Density::new(cov, g.clone())?) },
        })
    }

    fn eval(&self, z: &DVector<f64>) -> f64 {
        self.abg.log_density(z) + self.g.as_ref().map_or(0.0, |d| d.log_density(z))
            - self.ag.log_density(z)
            - self.bg.log_density(z)
    }
}

/// `I(a; b | given)` by sampling the joint.
pub fn mc_conditional_mutual_information(
    joint: &GaussianJoint,
    a: &[&str],
    b: &[&str],
    given: &[&str],
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_n(n)?;
    let (cov, idx) = layout(joint, a, b, given)?;
    let ratio = PointwiseCmi::new(&cov, &idx)?;
    let sampler = Sampler::new(&cov)?;
    let mut r = rng::stream(seed, 0);
    let samples: Vec<f64> = (0..n).map(|_| ratio.eval(&sampler.draw(&mut r))).collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Sampler of `(a, b, g)` with `g` from its marginal and `a`, `b` drawn
/// independently from their conditionals given `g`.
struct ProductGivenSampler {
    g: Sampler,
    a: (DMatrix<f64>, Sampler),
    b: (DMatrix<f64>, Sampler),
    dims: [usize; 3],
}

impl ProductGivenSampler {
    fn new(joint: &GaussianJoint, a: &[&str], b: &[&str], given: &[&str]) -> Result<Self> {
        let part = |target: &[&str]| -> Result<(DMatrix<f64>, Sampler)> {
            if given.is_empty() {
                let cov = joint.block_cov(target)?;
                Ok((DMatrix::zeros(cov.nrows(), 0), Sampler::new(&cov)?))
            } else {
                let c = joint.conditional(target, given)?;
                Ok((c.regression, Sampler::new(&c.cov)?))
            }
        };
        let g_cov = joint.block_cov(given)?;
        Ok(Self {
            g: Sampler::new(&g_cov)?,
            a: part(a)?,
            b: part(b)?,
            dims: [joint.indices(a)?.len(), joint.indices(b)?.len(), g_cov.nrows()],
        })
    }

    fn draw(&self, r: &mut Rng) -> DVector<f64> {
        let g = self.g.draw(r);
        let a = &self.a.0 * &g + self.a.1.draw(r);
        let b = &self.b.0 * &g + self.b.1.draw(r);
        let [na, nb, ng] = self.dims;
        DVector::from_iterator(na + nb + ng, a.iter().chain(b.iter()).chain(g.iter()).copied())
    }
}

/// `L(a; b | given)` by sampling the product of conditionals.
pub fn mc_conditional_lautum(
    joint: &GaussianJoint,
    a: &[&str],
    b: &[&str],
    given: &[&str],
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_n(n)?;
    let (cov, idx) = layout(joint, a, b, given)?;
    let ratio = PointwiseCmi::new(&cov, &idx)?;
    let sampler = ProductGivenSampler::new(joint, a, b, given)?;
    let mut r = rng::stream(seed, 0);
    let samples: Vec<f64> = (0..n).map(|_| -ratio.eval(&sampler.draw(&mut r))).collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// `E log P_dec(y | t)` with `(y, t)` drawn from `coupling`.
pub fn mc_expected_log_density(
    coupling: &GaussianJoint,
    y: &[&str],
    t: &[&str],
    decoder: &GaussianConditional,
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_n(n)?;
    let (cov, idx) = layout(coupling, y, t, &[])?;
    let sampler = Sampler::new(&cov)?;
    let factor = linalg::cholesky_pd(&decoder.cov, "decoder covariance")?;
    let mut r = rng::stream(seed, 0);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let z = sampler.draw(&mut r);
            let yv = DVector::from_iterator(idx[0].len(), idx[0].iter().map(|&i| z[i]));
            let tv = DVector::from_iterator(idx[1].len(), idx[1].iter().map(|&i| z[i]));
            linalg::gaussian_log_density(&factor, &(&decoder.regression * tv), &yv)
        })
        .collect();
    Ok(McEstimate::from_samples(&samples, seed))
}

/// Bound term of the decomposition: `X` from its marginal, `Y | X` and
/// `T | X` drawn independently, the true decoder `P(Y|T)` averaged, and the
/// closed-form `H(Y)` added.
pub fn mc_bound_term(joint: &GaussianJoint, n: usize, seed: u64) -> Result<McEstimate> {
    check_n(n)?;
    let decoder = joint.conditional(&["Y"], &["T"])?;
    let factor = linalg::cholesky_pd(&decoder.cov, "decoder covariance")?;
    let sampler = ProductGivenSampler::new(joint, &["Y"], &["T"], &["X"])?;
    let dy = joint.block_dim("Y")?;
    let dt = joint.block_dim("T")?;
    let mut r = rng::stream(seed, 0);
    let samples: Vec<f64> = (0..n)
        .map(|_| {
            let z = sampler.draw(&mut r);
            let yv = z.rows(0, dy).into_owned();
            let tv = z.rows(dy, dt).into_owned();
            linalg::gaussian_log_density(&factor, &(&decoder.regression * tv), &yv)
        })
        .collect();
    Ok(McEstimate::from_samples(&samples, seed).shifted(joint.entropy(&["Y"])?))
}
