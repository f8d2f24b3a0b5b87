//! Communication networks: graph Laplacians, time-varying schedules and
//! their spectral bounds.
//!
//! A round of communication multiplies the stacked node data by
//! `W_n = L_n ⊗ I_d`. The Kronecker product is never formed; [`Laplacian::apply`]
//! computes `L_n · X` on the `m × d` stack directly, which is the same thing
//! row-by-row.

mod eigen;
mod schedule;

pub use eigen::symmetric_eigenvalues;
pub use schedule::{spectral_bounds, NetworkSchedule, SpectralBounds, Topology};

use ndarray::{Array2, ArrayView2, ArrayViewMut2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetgraphError {
    #[error("a network needs at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    EdgeOutOfRange(usize, usize, usize),

    #[error("self-loop at node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("graph is disconnected: {components} components, so the Laplacian kernel has dimension {components} instead of 1")]
    Disconnected { components: usize },

    #[error("dimension mismatch: expected {expected} rows, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("edge probability must lie in (0, 1], got {0}")]
    InvalidProbability(f64),

    #[error("epoch length must be at least 1")]
    ZeroEpochLength,

    #[error("horizon must be at least 1")]
    ZeroHorizon,

    #[error("unknown topology `{0}` (expected cycle, star, complete, erdos_renyi or mst_of_er)")]
    UnknownTopology(String),
}

pub type Result<T> = std::result::Result<T, NetgraphError>;

/// Combinatorial Laplacian `D − A` of a connected undirected simple graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    entries: Array2<f64>,
}

impl Laplacian {
    pub fn from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if m < 1 {
            return Err(NetgraphError::TooFewNodes { min: 1, got: m });
        }
        let mut entries = Array2::<f64>::zeros((m, m));
        for &(a, b) in edges {
            if a >= m || b >= m {
                return Err(NetgraphError::EdgeOutOfRange(a, b, m));
            }
            if a == b {
                return Err(NetgraphError::SelfLoop(a));
            }
            if entries[[a, b]] != 0.0 {
                return Err(NetgraphError::DuplicateEdge(a.min(b), a.max(b)));
            }
            entries[[a, b]] = -1.0;
            entries[[b, a]] = -1.0;
            entries[[a, a]] += 1.0;
            entries[[b, b]] += 1.0;
        }
        let components = count_components(m, edges);
        if components != 1 {
            return Err(NetgraphError::Disconnected { components });
        }
        Ok(Self { entries })
    }

    pub fn nodes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.entries
    }

    /// Undirected edges `(i, j)` with `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let m = self.nodes();
        let mut out = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if self.entries[[i, j]] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        symmetric_eigenvalues(self.entries.view())
    }

    /// `Y = L · X` for an `m × d` node stack.
    pub fn apply(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(x.raw_dim());
        self.apply_into(x, out.view_mut())?;
        Ok(out)
    }

    pub fn apply_into(&self, x: ArrayView2<'_, f64>, mut out: ArrayViewMut2<'_, f64>) -> Result<()> {
        let m = self.nodes();
        if x.nrows() != m {
            return Err(NetgraphError::DimensionMismatch { expected: m, got: x.nrows() });
        }
        if out.raw_dim() != x.raw_dim() {
            return Err(NetgraphError::DimensionMismatch { expected: m, got: out.nrows() });
        }
        ndarray::linalg::general_mat_mul(1.0, &self.entries, &x, 0.0, &mut out);
        Ok(())
    }
}

/// Free-function form of [`Laplacian::from_edges`].
pub fn laplacian_from_edges(m: usize, edges: &[(usize, usize)]) -> Result<Laplacian> {
    Laplacian::from_edges(m, edges)
}

/// Free-function form of [`Laplacian::apply`].
pub fn apply_communication(lap: &Laplacian, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    lap.apply(x)
}

pub(crate) fn count_components(m: usize, edges: &[(usize, usize)]) -> usize {
    let mut dsu = DisjointSets::new(m);
    edges.iter().for_each(|&(a, b)| {
        dsu.union(a, b);
    });
    dsu.components()
}

pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), rank: vec![0; n], components: n }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if `a` and `b` were in different sets.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
        true
    }

    pub(crate) fn components(&self) -> usize {
        self.components
    }
}
