//! Graph operators on block-diagonal batches.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::models::ModelKind;
use crate::nn::{Csr, Tensor};

/// Dense GCN propagation matrix `D̃^{-1/2} (A + I) D̃^{-1/2}`.
pub fn gcn_propagation(g: &Graph) -> Tensor {
    gcn_operator(g.n(), g.edges()).to_dense()
}

fn degree_of(n: usize, edges: &[(usize, usize)]) -> Vec<f64> {
    let mut deg = vec![0.0; n];
    for &(u, v) in edges {
        deg[u] += 1.0;
        deg[v] += 1.0;
    }
    deg
}

pub(crate) fn gcn_operator(n: usize, edges: &[(usize, usize)]) -> Csr {
    let deg = degree_of(n, edges);
    let inv: Vec<f64> = deg.iter().map(|d| 1.0 / (d + 1.0).sqrt()).collect();
    let mut trip = Vec::with_capacity(n + 2 * edges.len());
    for v in 0..n {
        trip.push((v, v, inv[v] * inv[v]));
    }
    for &(u, v) in edges {
        let w = inv[u] * inv[v];
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    Csr::from_triplets(n, n, trip)
}

/// `A + (1 + eps) I`, the GIN aggregation.
pub(crate) fn gin_operator(n: usize, edges: &[(usize, usize)], eps: f64) -> Csr {
    let mut trip: Vec<_> = (0..n).map(|v| (v, v, 1.0 + eps)).collect();
    for &(u, v) in edges {
        trip.push((u, v, 1.0));
        trip.push((v, u, 1.0));
    }
    Csr::from_triplets(n, n, trip)
}

/// Scaled Laplacian `(2 / λ_max) L - I` with `λ_max = 2`, i.e.
/// `-D^{-1/2} A D^{-1/2}`. Isolated nodes get an all-zero row.
pub(crate) fn cheb_operator(n: usize, edges: &[(usize, usize)]) -> Csr {
    let deg = degree_of(n, edges);
    let inv: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut trip = Vec::with_capacity(2 * edges.len());
    for &(u, v) in edges {
        let w = -inv[u] * inv[v];
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    Csr::from_triplets(n, n, trip)
}

/// Attention support `N(u) ∪ {u}` with unit placeholder values.
pub(crate) fn attention_support(n: usize, edges: &[(usize, usize)]) -> Csr {
    gin_operator(n, edges, 0.0)
}

/// Disjoint union of graphs prepared for one forward pass.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Tensor,
    /// Graph index (within the batch) of every node.
    pub segments: Arc<Vec<usize>>,
    pub offsets: Vec<usize>,
    pub num_graphs: usize,
    pub edges: Vec<(usize, usize)>,
    /// Propagation operator of the model kind the batch was built for.
    pub(crate) op: Arc<Csr>,
}

impl Batch {
    pub fn new(graphs: &[&Graph], kind: ModelKind, gin_eps: f64) -> Result<Self> {
        let d = graphs.first().map_or(0, |g| g.feature_dim());
        if graphs.iter().any(|g| g.feature_dim() != d) {
            return Err(Error::input("graphs in a batch must share feature width"));
        }
        let mut offsets = Vec::with_capacity(graphs.len() + 1);
        let mut segments = Vec::new();
        let mut edges = Vec::new();
        let mut total = 0;
        for (i, g) in graphs.iter().enumerate() {
            offsets.push(total);
            segments.extend(std::iter::repeat_n(i, g.n()));
            edges.extend(g.edges().iter().map(|&(u, v)| (u + total, v + total)));
            total += g.n();
        }
        offsets.push(total);
        let features = Tensor::vstack(graphs.iter().map(|g| g.features()), d)?;
        Ok(Batch {
            features,
            segments: Arc::new(segments),
            offsets,
            num_graphs: graphs.len(),
            op: Arc::new(match kind {
                ModelKind::Gcn => gcn_operator(total, &edges),
                ModelKind::Gin => gin_operator(total, &edges, gin_eps),
                ModelKind::ChebNet => cheb_operator(total, &edges),
                ModelKind::Gat => attention_support(total, &edges),
            }),
            edges,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }
}
