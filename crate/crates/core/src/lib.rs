//! Information bottleneck models and the Markov-violation decomposition of
//! `I(T;Y)`.
//!
//! The crate covers the discrete bottleneck (Blahut–Arimoto iteration), the
//! Gaussian and sparse Gaussian bottlenecks, a linear-Gaussian realisation of
//! the deep variational bottleneck, and an exact decomposition of `I(T;Y)`
//! into the variational lower bound plus the conditional mutual and lautum
//! informations `I(Y;T|X)` and `L(Y;T|X)`. The DAG taxonomy of bottleneck
//! models is reproduced with d-separation.

pub mod cli;
pub mod decomposition;
pub mod discrete;
pub mod dvib;
pub mod error;
pub mod gaussian;
pub mod gib;
pub mod graph;
pub mod linalg;
pub mod mc;
pub mod optim;
pub mod rng;
pub mod sem;

pub use error::{IbError, Result};
pub use gaussian::{GaussianConditional, GaussianJoint};
pub use graph::{Dag, MarkovClass, Vertex};
pub use sem::{LinearGaussianSem, Scenario};
