//! Directed graphical models over the three bottleneck variables.
//!
//! The vertex universe is fixed to `{X, Y, T}` so that every statement about
//! the family of IB models can be checked exhaustively. `d_separated` follows
//! the usual path-blocking rules; `admissible_ib_dags` filters the 25 labeled
//! DAGs down to the models in which `T` has no direct parent `Y` and is
//! marginally dependent on both `X` and `Y`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{IbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Vertex {
    X,
    Y,
    T,
}

impl Vertex {
    pub const ALL: [Vertex; 3] = [Vertex::X, Vertex::Y, Vertex::T];

    pub fn name(self) -> &'static str {
        match self {
            Vertex::X => "X",
            Vertex::Y => "Y",
            Vertex::T => "T",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Vertex {
    type Err = IbError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "X" | "x" => Ok(Vertex::X),
            "Y" | "y" => Ok(Vertex::Y),
            "T" | "t" => Ok(Vertex::T),
            other => Err(IbError::InvalidDag(format!("unknown vertex `{other}`"))),
        }
    }
}

pub type Edge = (Vertex, Vertex);

/// Parses `"X->T"` into an edge.
pub fn parse_edge(s: &str) -> Result<Edge> {
    let (from, to) = s
        .split_once("->")
        .ok_or_else(|| IbError::InvalidDag(format!("edge `{s}` is not of the form A->B")))?;
    Ok((from.parse()?, to.parse()?))
}

/// A DAG on `{X, Y, T}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Dag {
    edges: BTreeSet<Edge>,
}

impl Dag {
    pub fn new(edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (u, v) in edges {
            if u == v {
                return Err(IbError::InvalidDag(format!("self-loop on {u}")));
            }
            if !set.insert((u, v)) {
                return Err(IbError::InvalidDag(format!("duplicate edge {u}->{v}")));
            }
        }
        let dag = Self { edges: set };
        if dag.has_cycle() {
            return Err(IbError::InvalidDag(format!("{dag} contains a directed cycle")));
        }
        Ok(dag)
    }

    pub fn empty() -> Self {
        Self { edges: BTreeSet::new() }
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: Vertex, v: Vertex) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn adjacent(&self, u: Vertex, v: Vertex) -> bool {
        self.has_edge(u, v) || self.has_edge(v, u)
    }

    pub fn parents(&self, v: Vertex) -> Vec<Vertex> {
        Vertex::ALL.into_iter().filter(|&u| self.has_edge(u, v)).collect()
    }

    /// `v` together with everything reachable from it along directed edges.
    pub fn descendants(&self, v: Vertex) -> BTreeSet<Vertex> {
        let mut seen = BTreeSet::from([v]);
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            for w in Vertex::ALL {
                if self.has_edge(u, w) && seen.insert(w) {
                    stack.push(w);
                }
            }
        }
        seen
    }

    /// Vertices in an order where every parent precedes its children.
    pub fn topological_order(&self) -> Vec<Vertex> {
        let mut order = Vec::with_capacity(3);
        while order.len() < 3 {
            let next = Vertex::ALL
                .into_iter()
                .find(|v| !order.contains(v) && self.parents(*v).iter().all(|p| order.contains(p)))
                .expect("acyclic graph has a source among the remaining vertices");
            order.push(next);
        }
        order
    }

    fn has_cycle(&self) -> bool {
        self.edges
            .iter()
            .any(|&(u, v)| u != v && self.descendants(v).contains(&u))
    }

    /// Whether every path between `a` and `b` is blocked by `given`.
    pub fn d_separated(&self, a: Vertex, b: Vertex, given: &[Vertex]) -> bool {
        assert_ne!(a, b, "d-separation needs two distinct vertices");
        assert!(
            !given.contains(&a) && !given.contains(&b),
            "endpoints may not be conditioned on"
        );
        let mut path = vec![a];
        !self.open_path_exists(&mut path, b, given)
    }

    fn open_path_exists(&self, path: &mut Vec<Vertex>, target: Vertex, given: &[Vertex]) -> bool {
        let last = *path.last().expect("path starts at the source");
        for next in Vertex::ALL {
            if path.contains(&next) || !self.adjacent(last, next) {
                continue;
            }
            if path.len() >= 2 {
                let prev = path[path.len() - 2];
                if self.triple_blocked(prev, last, next, given) {
                    continue;
                }
            }
            if next == target {
                return true;
            }
            path.push(next);
            let open = self.open_path_exists(path, target, given);
            path.pop();
            if open {
                return true;
            }
        }
        false
    }

    fn triple_blocked(&self, prev: Vertex, mid: Vertex, next: Vertex, given: &[Vertex]) -> bool {
        let collider = self.has_edge(prev, mid) && self.has_edge(next, mid);
        if collider {
            !self.descendants(mid).iter().any(|d| given.contains(d))
        } else {
            given.contains(&mid)
        }
    }
}

impl fmt::Display for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.edges.is_empty() {
            return f.write_str("(no edges)");
        }
        let parts: Vec<String> = self.edges.iter().map(|(u, v)| format!("{u}->{v}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Which undirected Markov chain a DAG entails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MarkovClass {
    /// `T ⟂ Y | X`, the assumption of the original bottleneck.
    ChainTXY,
    /// `X ⟂ Y | T`, the structure the deep variational bottleneck builds in.
    ChainXTY,
    Other,
}

impl MarkovClass {
    pub fn label(self) -> &'static str {
        match self {
            MarkovClass::ChainTXY => "T-X-Y",
            MarkovClass::ChainXTY => "X-T-Y",
            MarkovClass::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub class: MarkovClass,
    /// Both chains hold; `class` is then `ChainTXY`.
    pub both_chains: bool,
}

pub fn classify(dag: &Dag) -> Classification {
    let txy = dag.d_separated(Vertex::T, Vertex::Y, &[Vertex::X]);
    let xty = dag.d_separated(Vertex::X, Vertex::Y, &[Vertex::T]);
    let class = match (txy, xty) {
        (true, _) => MarkovClass::ChainTXY,
        (false, true) => MarkovClass::ChainXTY,
        (false, false) => MarkovClass::Other,
    };
    Classification { class, both_chains: txy && xty }
}

/// All labeled DAGs on `{X, Y, T}` (25 of them), in a fixed order.
pub fn enumerate_all_dags() -> Vec<Dag> {
    let pairs: Vec<Edge> = Vertex::ALL
        .into_iter()
        .flat_map(|u| Vertex::ALL.into_iter().filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    let mut out = Vec::new();
    for mask in 0u32..(1 << pairs.len()) {
        let edges = pairs
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, e)| *e);
        if let Ok(dag) = Dag::new(edges) {
            out.push(dag);
        }
    }
    out.sort_by_key(|d| (d.edge_count(), d.clone()));
    out
}

/// Whether a DAG is an admissible bottleneck model: no arrow `Y -> T`, and
/// `T` is not rendered independent of `X` or of `Y` (which rules out the
/// colliders `T -> X <- Y` and `T -> Y <- X` along with graphs in which `T`
/// is cut off).
pub fn is_admissible(dag: &Dag) -> bool {
    !dag.has_edge(Vertex::Y, Vertex::T)
        && !dag.d_separated(Vertex::T, Vertex::X, &[])
        && !dag.d_separated(Vertex::T, Vertex::Y, &[])
}

/// The admissible bottleneck DAGs, grouped by Markov class.
pub fn admissible_ib_dags() -> Vec<(Dag, MarkovClass)> {
    let mut out: Vec<(Dag, MarkovClass)> = enumerate_all_dags()
        .into_iter()
        .filter(is_admissible)
        .map(|d| {
            let c = classify(&d).class;
            (d, c)
        })
        .collect();
    out.sort_by(|a, b| (a.1, a.0.edge_count(), &a.0).cmp(&(b.1, b.0.edge_count(), &b.0)));
    out
}
