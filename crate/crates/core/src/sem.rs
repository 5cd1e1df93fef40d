//! Linear-Gaussian structural equation models on `{X, Y, T}`.
//!
//! Each vertex is `v = Σ_{u ∈ pa(v)} C_{u→v} u + η_v` with `η_v ~ N(0, N_v)`.
//! [`LinearGaussianSem::build_joint`] propagates the noise covariances in
//! topological order to obtain the exact joint; the closed form
//! `(I - W)⁻¹ N (I - W)⁻ᵀ` is kept as a cross-check.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};
use crate::gaussian::GaussianJoint;
use crate::graph::{Dag, Edge, Vertex};
use crate::linalg::{self, block_diag};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianSem {
    dag: Dag,
    dims: [usize; 3],
    coeffs: BTreeMap<Edge, DMatrix<f64>>,
    noise_cov: [DMatrix<f64>; 3],
}

impl LinearGaussianSem {
    /// `dims` and `noise_cov` are indexed by [`Vertex::index`] (X, Y, T).
    pub fn new(
        dag: Dag,
        dims: [usize; 3],
        coeffs: BTreeMap<Edge, DMatrix<f64>>,
        noise_cov: [DMatrix<f64>; 3],
    ) -> Result<Self> {
        for v in Vertex::ALL {
            let d = dims[v.index()];
            if d == 0 {
                return Err(IbError::InvalidSem(format!("vertex {v} has dimension 0")));
            }
            let n = &noise_cov[v.index()];
            if n.shape() != (d, d) {
                return Err(IbError::InvalidSem(format!(
                    "noise covariance of {v} is {:?}, expected ({d}, {d})",
                    n.shape()
                )));
            }
            if (n - n.transpose()).amax() > 1e-12 || nalgebra::Cholesky::new(n.clone()).is_none() {
                return Err(IbError::InvalidSem(format!(
                    "noise covariance of {v} is not symmetric positive definite"
                )));
            }
        }
        for (u, v) in dag.edges() {
            let c = coeffs
                .get(&(u, v))
                .ok_or_else(|| IbError::InvalidSem(format!("missing coefficient for {u}->{v}")))?;
            if c.shape() != (dims[v.index()], dims[u.index()]) {
                return Err(IbError::InvalidSem(format!(
                    "coefficient {u}->{v} is {:?}, expected ({}, {})",
                    c.shape(),
                    dims[v.index()],
                    dims[u.index()]
                )));
            }
        }
        if let Some((u, v)) = coeffs.keys().find(|(u, v)| !dag.has_edge(*u, *v)) {
            return Err(IbError::InvalidSem(format!(
                "coefficient given for {u}->{v}, which is not an edge"
            )));
        }
        Ok(Self { dag, dims, coeffs, noise_cov })
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn dim(&self, v: Vertex) -> usize {
        self.dims[v.index()]
    }

    pub fn coeff(&self, edge: Edge) -> Option<&DMatrix<f64>> {
        self.coeffs.get(&edge)
    }

    pub fn noise_cov(&self, v: Vertex) -> &DMatrix<f64> {
        &self.noise_cov[v.index()]
    }

    /// Copy of the model with the coefficient of an existing edge replaced.
    pub fn with_coeff(&self, edge: Edge, coeff: DMatrix<f64>) -> Result<Self> {
        if !self.dag.has_edge(edge.0, edge.1) {
            return Err(IbError::InvalidSem(format!(
                "{}->{} is not an edge of the model",
                edge.0, edge.1
            )));
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.insert(edge, coeff);
        Self::new(self.dag.clone(), self.dims, coeffs, self.noise_cov.clone())
    }

    fn offsets(&self) -> [usize; 3] {
        [0, self.dims[0], self.dims[0] + self.dims[1]]
    }

    fn total_dim(&self) -> usize {
        self.dims.iter().sum()
    }

    /// Loadings of every vertex on the stacked noise vector `(η_X, η_Y, η_T)`,
    /// built in topological order.
    fn noise_loadings(&self) -> [DMatrix<f64>; 3] {
        let n = self.total_dim();
        let offsets = self.offsets();
        let mut loadings: [DMatrix<f64>; 3] =
            std::array::from_fn(|i| DMatrix::zeros(self.dims[i], n));
        for v in self.dag.topological_order() {
            let mut m = DMatrix::zeros(self.dim(v), n);
            m.view_mut((0, offsets[v.index()]), (self.dim(v), self.dim(v)))
                .fill_with_identity();
            for p in self.dag.parents(v) {
                m += &self.coeffs[&(p, v)] * &loadings[p.index()];
            }
            loadings[v.index()] = m;
        }
        loadings
    }

    fn stacked_noise_cov(&self) -> DMatrix<f64> {
        block_diag(
            &block_diag(&self.noise_cov[0], &self.noise_cov[1]),
            &self.noise_cov[2],
        )
    }

    fn blocks(&self) -> Vec<(&'static str, usize)> {
        Vertex::ALL.iter().map(|v| (v.name(), self.dim(*v))).collect()
    }

    /// Exact joint over blocks `(X, Y, T)`.
    pub fn build_joint(&self) -> Result<GaussianJoint> {
        let loadings = self.noise_loadings();
        let noise = self.stacked_noise_cov();
        let n = self.total_dim();
        let mut stacked = DMatrix::zeros(n, n);
        let offsets = self.offsets();
        for v in Vertex::ALL {
            stacked
                .view_mut((offsets[v.index()], 0), (self.dim(v), n))
                .copy_from(&loadings[v.index()]);
        }
        let cov = linalg::symmetrize(&(&stacked * noise * stacked.transpose()));
        GaussianJoint::new(self.blocks(), cov)
    }

    /// Cross-check of [`build_joint`](Self::build_joint) through
    /// `(I - W)⁻¹ N (I - W)⁻ᵀ`.
    pub fn build_joint_via_inverse(&self) -> Result<GaussianJoint> {
        let n = self.total_dim();
        let offsets = self.offsets();
        let mut w = DMatrix::zeros(n, n);
        for ((u, v), c) in &self.coeffs {
            w.view_mut((offsets[v.index()], offsets[u.index()]), c.shape())
                .copy_from(c);
        }
        let inv = (DMatrix::identity(n, n) - w)
            .try_inverse()
            .ok_or_else(|| IbError::InvalidSem("I - W is singular".into()))?;
        let cov = linalg::symmetrize(&(&inv * self.stacked_noise_cov() * inv.transpose()));
        GaussianJoint::new(self.blocks(), cov)
    }

    /// `n` i.i.d. draws as rows, columns ordered `(X, Y, T)`.
    pub fn sample(&self, n: usize, seed: u64) -> DMatrix<f64> {
        assert!(n >= 1, "sample size must be positive");
        let mut rng = rng::stream(seed, 0);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with(&self, n: usize, rng: &mut Rng) -> DMatrix<f64> {
        let factors: Vec<DMatrix<f64>> = self
            .noise_cov
            .iter()
            .map(|c| nalgebra::Cholesky::new(c.clone()).expect("validated PD").l())
            .collect();
        let order = self.dag.topological_order();
        let offsets = self.offsets();
        let mut out = DMatrix::zeros(n, self.total_dim());
        let mut values: [DVector<f64>; 3] = std::array::from_fn(|i| DVector::zeros(self.dims[i]));
        for row in 0..n {
            for &v in &order {
                let i = v.index();
                let mut x = &factors[i] * rng::normal_vector(rng, self.dims[i]);
                for p in self.dag.parents(v) {
                    x += &self.coeffs[&(p, v)] * &values[p.index()];
                }
                values[i] = x;
            }
            for v in Vertex::ALL {
                for (k, val) in values[v.index()].iter().enumerate() {
                    out[(row, offsets[v.index()] + k)] = *val;
                }
            }
        }
        out
    }
}

fn scalar(v: f64) -> DMatrix<f64> {
    DMatrix::from_element(1, 1, v)
}

fn unit_sem(edges: &[Edge]) -> LinearGaussianSem {
    let dag = Dag::new(edges.iter().copied()).expect("scenario graphs are acyclic");
    let coeffs = edges.iter().map(|e| (*e, scalar(1.0))).collect();
    LinearGaussianSem::new(dag, [1, 1, 1], coeffs, std::array::from_fn(|_| scalar(1.0)))
        .expect("scenario models are valid")
}

/// Named one-dimensional scenarios with unit coefficients and unit noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// `T <- X -> Y`: the original bottleneck structure.
    ChainTxy,
    /// `X -> T -> Y`: the deep variational bottleneck structure.
    ChainXty,
    /// `T <- X -> Y` plus `T -> Y`.
    Confounded,
    /// `X -> T <- Y`: inadmissible, used as a negative control.
    YIntoT,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::ChainTxy,
        Scenario::ChainXty,
        Scenario::Confounded,
        Scenario::YIntoT,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::ChainTxy => "chain_txy",
            Scenario::ChainXty => "chain_xty",
            Scenario::Confounded => "confounded",
            Scenario::YIntoT => "y_into_t",
        }
    }

    pub fn from_name(name: &str) -> Option<Scenario> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn sem(self) -> LinearGaussianSem {
        use Vertex::{T, X, Y};
        match self {
            Scenario::ChainTxy => unit_sem(&[(X, T), (X, Y)]),
            Scenario::ChainXty => unit_sem(&[(X, T), (T, Y)]),
            Scenario::Confounded => unit_sem(&[(X, T), (X, Y), (T, Y)]),
            Scenario::YIntoT => unit_sem(&[(X, T), (Y, T)]),
        }
    }
}

/// Random model on `dag`: coefficient entries `±U[0.3, 1.5]`, diagonal noise
/// variances `U[0.5, 2.0]`.
pub fn random_sem(dag: &Dag, dims: [usize; 3], rng: &mut Rng) -> LinearGaussianSem {
    let coeffs = dag
        .edges()
        .map(|(u, v)| {
            let m = DMatrix::from_fn(dims[v.index()], dims[u.index()], |_, _| {
                rng::signed_uniform(rng, 0.3, 1.5)
            });
            ((u, v), m)
        })
        .collect();
    let noise = std::array::from_fn(|i| {
        DMatrix::from_diagonal(&DVector::from_fn(dims[i], |_, _| rng::uniform(rng, 0.5, 2.0)))
    });
    LinearGaussianSem::new(dag.clone(), dims, coeffs, noise).expect("generated model is valid")
}

/// On-disk form of a model:
///
/// ```json
/// {"vertices": {"X": 1, "Y": 1, "T": 1},
///  "edges": [{"from": "X", "to": "T", "coeff": [[1.0]]}],
///  "noise_cov": {"X": [[1.0]], "Y": [[1.0]], "T": [[1.0]]}}
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SemDoc {
    pub vertices: BTreeMap<Vertex, usize>,
    pub edges: Vec<EdgeDoc>,
    pub noise_cov: BTreeMap<Vertex, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: Vertex,
    pub to: Vertex,
    pub coeff: Vec<Vec<f64>>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(IbError::InvalidSem(format!("{what} is not a rectangular matrix")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl TryFrom<SemDoc> for LinearGaussianSem {
    type Error = IbError;

    fn try_from(doc: SemDoc) -> Result<Self> {
        let mut dims = [0; 3];
        let mut noise: [DMatrix<f64>; 3] = std::array::from_fn(|_| DMatrix::zeros(0, 0));
        for v in Vertex::ALL {
            dims[v.index()] = *doc
                .vertices
                .get(&v)
                .ok_or_else(|| IbError::InvalidSem(format!("missing dimension for {v}")))?;
            let rows = doc
                .noise_cov
                .get(&v)
                .ok_or_else(|| IbError::InvalidSem(format!("missing noise covariance for {v}")))?;
            noise[v.index()] = from_rows(rows, &format!("noise covariance of {v}"))?;
        }
        let dag = Dag::new(doc.edges.iter().map(|e| (e.from, e.to)))?;
        let coeffs = doc
            .edges
            .iter()
            .map(|e| Ok(((e.from, e.to), from_rows(&e.coeff, "edge coefficient")?)))
            .collect::<Result<_>>()?;
        LinearGaussianSem::new(dag, dims, coeffs, noise)
    }
}

impl From<&LinearGaussianSem> for SemDoc {
    fn from(sem: &LinearGaussianSem) -> Self {
        SemDoc {
            vertices: Vertex::ALL.iter().map(|v| (*v, sem.dim(*v))).collect(),
            edges: sem
                .coeffs
                .iter()
                .map(|((u, v), c)| EdgeDoc { from: *u, to: *v, coeff: to_rows(c) })
                .collect(),
            noise_cov: Vertex::ALL
                .iter()
                .map(|v| (*v, to_rows(sem.noise_cov(*v))))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Vertex::{T, X, Y};

    fn assert_cov(joint: &GaussianJoint, order: &[&str], expected: &[f64], tol: f64) {
        let got = joint.block_cov(order).unwrap();
        let n = order.len();
        for i in 0..n {
            for j in 0..n {
                assert!(
                    (got[(i, j)] - expected[i * n + j]).abs() <= tol,
                    "entry ({i},{j}): {} vs {}",
                    got[(i, j)],
                    expected[i * n + j]
                );
            }
        }
    }

    #[test]
    fn build_joint_examples() {
        let empty = unit_sem(&[]).build_joint().unwrap();
        assert_cov(&empty, &["X", "Y", "T"], &[1., 0., 0., 0., 1., 0., 0., 0., 1.], 0.0);

        let xt = unit_sem(&[(X, T)]).build_joint().unwrap();
        assert_cov(&xt, &["X", "T"], &[1., 1., 1., 2.], 0.0);

        let chain = Scenario::ChainXty.sem().build_joint().unwrap();
        assert_cov(&chain, &["X", "T", "Y"], &[1., 1., 1., 1., 2., 2., 1., 2., 3.], 0.0);
        assert!(chain
            .conditional_mutual_information(&["X"], &["Y"], &["T"])
            .unwrap()
            .abs()
            < 1e-9);
    }

    #[test]
    fn inverse_route_agrees() {
        let mut rng = rng::stream(11, 0);
        for dag in crate::graph::enumerate_all_dags() {
            let sem = random_sem(&dag, [2, 1, 2], &mut rng);
            let a = sem.build_joint().unwrap();
            let b = sem.build_joint_via_inverse().unwrap();
            assert!((a.cov() - b.cov()).amax() < 1e-12, "{dag}");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let sem = Scenario::ChainXty.sem();
        assert_eq!(sem.sample(5, 3), sem.sample(5, 3));
        assert_ne!(sem.sample(5, 3), sem.sample(5, 4));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let dag = Dag::new([(X, T)]).unwrap();
        let noise = std::array::from_fn(|_| scalar(1.0));
        assert!(LinearGaussianSem::new(dag.clone(), [1, 1, 1], BTreeMap::new(), noise.clone())
            .is_err());
        let wrong_shape = BTreeMap::from([((X, T), DMatrix::zeros(2, 1))]);
        assert!(LinearGaussianSem::new(dag.clone(), [1, 1, 1], wrong_shape, noise.clone()).is_err());
        let extra = BTreeMap::from([((X, T), scalar(1.0)), ((X, Y), scalar(1.0))]);
        assert!(LinearGaussianSem::new(dag.clone(), [1, 1, 1], extra, noise).is_err());
        let bad_noise = [scalar(1.0), scalar(-1.0), scalar(1.0)];
        let coeffs = BTreeMap::from([((X, T), scalar(1.0))]);
        assert!(LinearGaussianSem::new(dag, [1, 1, 1], coeffs, bad_noise).is_err());
    }

    #[test]
    fn json_document_round_trip() {
        let sem = Scenario::Confounded.sem();
        let text = serde_json::to_string(&SemDoc::from(&sem)).unwrap();
        let doc: SemDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(LinearGaussianSem::try_from(doc).unwrap(), sem);
    }
}
