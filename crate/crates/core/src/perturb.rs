//! The perturbation suite: transforms that remove or emphasize either the
//! node-feature channel or the structure channel of a dataset.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ball_in, degrees, Dataset, Graph};
use crate::nn::Tensor;

/// How fragmentation picks the next ball center among unassigned nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum SeedPolicy {
    #[default]
    LowestId,
    /// Largest degree in the original graph, ties broken by smallest id.
    HighestDegreeThenLowestId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PerturbationKind {
    Identity,
    NoNodeFeatures,
    NodeDegree,
    NoEdges,
    FullyConnected,
    Fragmented { k: usize, seed_policy: SeedPolicy },
}

impl PerturbationKind {
    pub fn fragmented(k: usize) -> Self {
        PerturbationKind::Fragmented {
            k,
            seed_policy: SeedPolicy::LowestId,
        }
    }

    /// The fixed benchmark suite, in profile column order.
    pub fn canonical_suite() -> Vec<PerturbationKind> {
        use PerturbationKind::*;
        vec![
            Identity,
            NoNodeFeatures,
            NodeDegree,
            NoEdges,
            FullyConnected,
            PerturbationKind::fragmented(1),
            PerturbationKind::fragmented(2),
            PerturbationKind::fragmented(3),
        ]
    }
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationKind::Identity => f.write_str("identity"),
            PerturbationKind::NoNodeFeatures => f.write_str("no-node-features"),
            PerturbationKind::NodeDegree => f.write_str("node-degree"),
            PerturbationKind::NoEdges => f.write_str("no-edges"),
            PerturbationKind::FullyConnected => f.write_str("fully-connected"),
            PerturbationKind::Fragmented { k, seed_policy } => match seed_policy {
                SeedPolicy::LowestId => write!(f, "fragmented-{k}"),
                SeedPolicy::HighestDegreeThenLowestId => write!(f, "fragmented-{k}-maxdeg"),
            },
        }
    }
}

impl FromStr for PerturbationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => PerturbationKind::Identity,
            "no-node-features" => PerturbationKind::NoNodeFeatures,
            "node-degree" => PerturbationKind::NodeDegree,
            "no-edges" => PerturbationKind::NoEdges,
            "fully-connected" => PerturbationKind::FullyConnected,
            other => {
                let rest = other
                    .strip_prefix("fragmented-")
                    .ok_or_else(|| Error::input(format!("unknown perturbation `{other}`")))?;
                let (num, seed_policy) = match rest.strip_suffix("-maxdeg") {
                    Some(num) => (num, SeedPolicy::HighestDegreeThenLowestId),
                    None => (rest, SeedPolicy::LowestId),
                };
                let k: usize = num
                    .parse()
                    .map_err(|_| Error::input(format!("bad fragmentation radius in `{other}`")))?;
                if k == 0 {
                    return Err(Error::input("fragmentation needs k >= 1"));
                }
                PerturbationKind::Fragmented { k, seed_policy }
            }
        })
    }
}

impl TryFrom<String> for PerturbationKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PerturbationKind> for String {
    fn from(p: PerturbationKind) -> String {
        p.to_string()
    }
}

impl FromStr for SeedPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest-id" => Ok(SeedPolicy::LowestId),
            "max-degree" | "highest-degree" => Ok(SeedPolicy::HighestDegreeThenLowestId),
            other => Err(Error::input(format!("unknown seed policy `{other}`"))),
        }
    }
}

/// Applies one perturbation to every graph. Node counts, labels, task kind,
/// split and graph order are preserved.
pub fn apply(p: PerturbationKind, d: &Dataset) -> Result<Dataset> {
    let per_graph = |f: &dyn Fn(&Graph) -> Graph| d.map_graphs(d.graphs().iter().map(f).collect());
    match p {
        PerturbationKind::Identity => Ok(d.clone()),
        PerturbationKind::NoNodeFeatures => per_graph(&no_node_features),
        PerturbationKind::NodeDegree => node_degree_features(d),
        PerturbationKind::NoEdges => per_graph(&no_edges),
        PerturbationKind::FullyConnected => per_graph(&fully_connected),
        PerturbationKind::Fragmented { k, seed_policy } => {
            if k == 0 {
                return Err(Error::input("fragmentation needs k >= 1"));
            }
            per_graph(&|g| fragmented(g, k, seed_policy))
        }
    }
}

/// Replaces features by a constant ones column.
pub fn no_node_features(g: &Graph) -> Graph {
    g.with_features(Tensor::ones(g.n(), 1))
        .expect("row count unchanged")
}

/// Replaces features by the one-hot index of each node's degree within the
/// sorted set of degrees occurring anywhere in the dataset.
pub fn node_degree_features(d: &Dataset) -> Result<Dataset> {
    let per_graph: Vec<Vec<usize>> = d.graphs().iter().map(degrees).collect();
    let mut vocab: Vec<usize> = per_graph.iter().flatten().copied().collect();
    vocab.sort_unstable();
    vocab.dedup();
    let graphs = d
        .graphs()
        .iter()
        .zip(&per_graph)
        .map(|(g, degs)| {
            let mut feats = Tensor::zeros(g.n(), vocab.len());
            for (v, deg) in degs.iter().enumerate() {
                let slot = vocab.binary_search(deg).expect("degree is in vocabulary");
                feats.set(v, slot, 1.0);
            }
            g.with_features(feats)
        })
        .collect::<Result<Vec<_>>>()?;
    d.map_graphs(graphs)
}

pub fn no_edges(g: &Graph) -> Graph {
    g.with_edges([])
}

pub fn fully_connected(g: &Graph) -> Graph {
    let n = g.n();
    g.with_edges((0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

/// Greedy cover of the graph by balls of hop radius `k - 1` grown inside the
/// not-yet-assigned nodes; only edges inside a ball survive.
pub fn fragmented(g: &Graph, k: usize, seed_policy: SeedPolicy) -> Graph {
    let component = fragment_assignment(g, k, seed_policy);
    g.with_edges(
        g.edges()
            .iter()
            .copied()
            .filter(|&(u, v)| component[u] == component[v]),
    )
}

/// Fragment id of every node, numbered in seed order.
pub fn fragment_assignment(g: &Graph, k: usize, seed_policy: SeedPolicy) -> Vec<usize> {
    assert!(k >= 1, "fragmentation needs k >= 1");
    let n = g.n();
    let adj = g.adjacency();
    let deg = degrees(g);
    // Seed visiting order is fixed up front: seeds are the first unassigned
    // node in this order.
    let mut order: Vec<usize> = (0..n).collect();
    if seed_policy == SeedPolicy::HighestDegreeThenLowestId {
        order.sort_by(|&a, &b| deg[b].cmp(&deg[a]).then(a.cmp(&b)));
    }
    let mut component = vec![usize::MAX; n];
    let mut next_id = 0;
    for &seed in &order {
        if component[seed] != usize::MAX {
            continue;
        }
        let ball = ball_in(&adj, seed, k - 1, |v| component[v] == usize::MAX);
        for v in ball {
            component[v] = next_id;
        }
        next_id += 1;
    }
    component
}
