//! Synthetic datasets that isolate one information channel each, plus a
//! stochastic-block-model node classification task in the style of CLUSTER.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, TaskKind};
use crate::nn::Tensor;

pub const FEATURE_ONLY_DIM: usize = 4;
/// Weights of the linear rule that labels `feature_only` graphs.
pub const FEATURE_ONLY_RULE: [f64; FEATURE_ONLY_DIM] = [1.0, -1.0, 0.5, 0.25];

fn random_permutation(n: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Graph label = `[rule · mean(features) > 0]`; topology is an independent
/// Erdős–Rényi graph on 8–16 nodes with edge probability 0.3.
pub fn gen_feature_only(n_graphs: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let n = rng.gen_range(8..=16);
        let data: Vec<f64> = (0..n * FEATURE_ONLY_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let feats = Tensor::from_vec(n, FEATURE_ONLY_DIM, data)?;
        let label = usize::from(feature_only_rule(&feats) > 0.0);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.3) {
                    edges.push((u, v));
                }
            }
        }
        graphs.push(Graph::new(n, edges, feats, None, Some(label))?);
    }
    Dataset::new("feature_only", graphs, TaskKind::GraphClassification, 2, None)
}

/// Score whose sign decides a `feature_only` label.
pub fn feature_only_rule(features: &Tensor) -> f64 {
    let n = features.rows().max(1) as f64;
    (0..features.rows())
        .map(|r| {
            features
                .row(r)
                .iter()
                .zip(FEATURE_ONLY_RULE)
                .map(|(x, w)| x * w)
                .sum::<f64>()
        })
        .sum::<f64>()
        / n
}

/// Class 0: one path on `2m` nodes. Class 1: two disjoint paths on `m` nodes
/// each. `m` is drawn from 6..=8, node ids are shuffled, and features are
/// constant ones, so the label is carried by structure alone (component
/// count 1 vs 2).
pub fn gen_structure_only(n_graphs: usize, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut graphs = Vec::with_capacity(n_graphs);
    for _ in 0..n_graphs {
        let label = rng.gen_range(0..2usize);
        let m = rng.gen_range(6..=8usize);
        let n = 2 * m;
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        if label == 1 {
            edges.retain(|&(u, _)| u != m - 1);
        }
        let perm = random_permutation(n, &mut rng);
        let g = Graph::new(n, edges, Tensor::ones(n, 1), None, Some(label))?.permuted(&perm)?;
        graphs.push(g);
    }
    Dataset::new("structure_only", graphs, TaskKind::GraphClassification, 2, None)
}

/// Stochastic block model with a few labeled "key" nodes per block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmSpec {
    pub blocks: usize,
    pub min_block_size: usize,
    pub max_block_size: usize,
    /// Edge probability inside a block.
    pub p: f64,
    /// Edge probability between blocks.
    pub q: f64,
    /// Each block reveals its class on `ceil(labeled_fraction * size)` nodes.
    pub labeled_fraction: f64,
    pub graphs: usize,
    pub seed: u64,
}

impl Default for SbmSpec {
    fn default() -> Self {
        SbmSpec {
            blocks: 6,
            min_block_size: 5,
            max_block_size: 15,
            p: 0.55,
            q: 0.25,
            labeled_fraction: 0.05,
            graphs: 100,
            seed: 0,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.blocks < 2 {
            return Err(Error::input("an SBM needs at least two blocks"));
        }
        if !(0.0 <= self.q && self.q < self.p && self.p <= 1.0) {
            return Err(Error::input("SBM probabilities must satisfy 0 <= q < p <= 1"));
        }
        if self.min_block_size == 0 || self.min_block_size > self.max_block_size {
            return Err(Error::input("bad SBM block size range"));
        }
        if !(0.0..=1.0).contains(&self.labeled_fraction) {
            return Err(Error::input("labeled_fraction must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn key_nodes(&self, block_size: usize) -> usize {
        ((self.labeled_fraction * block_size as f64).ceil() as usize).min(block_size)
    }
}

/// Inductive node classification: a node's class is its block. Key nodes
/// carry the one-hot of their class (width `blocks + 1`); every other node
/// carries only the trailing "unlabeled" indicator.
pub fn gen_sbm_cluster(spec: &SbmSpec) -> Result<Dataset> {
    spec.validate()?;
    let c = spec.blocks;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut graphs = Vec::with_capacity(spec.graphs);
    for _ in 0..spec.graphs {
        let sizes: Vec<usize> = (0..c)
            .map(|_| rng.gen_range(spec.min_block_size..=spec.max_block_size))
            .collect();
        let n: usize = sizes.iter().sum();
        let mut block = Vec::with_capacity(n);
        let mut feats = Tensor::zeros(n, c + 1);
        for (b, &size) in sizes.iter().enumerate() {
            let keys = spec.key_nodes(size);
            for i in 0..size {
                let v = block.len();
                if i < keys {
                    feats.set(v, b, 1.0);
                } else {
                    feats.set(v, c, 1.0);
                }
                block.push(b);
            }
        }
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let prob = if block[u] == block[v] { spec.p } else { spec.q };
                if rng.gen_bool(prob) {
                    edges.push((u, v));
                }
            }
        }
        let perm = random_permutation(n, &mut rng);
        let g = Graph::new(n, edges, feats, Some(block), None)?.permuted(&perm)?;
        graphs.push(g);
    }
    Dataset::new("sbm_cluster", graphs, TaskKind::NodeClassificationInductive, c, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::connected_components;

    #[test]
    fn degenerate_sbm_gives_disjoint_cliques() {
        let spec = SbmSpec {
            blocks: 2,
            min_block_size: 3,
            max_block_size: 3,
            p: 1.0,
            q: 0.0,
            graphs: 4,
            ..Default::default()
        };
        let ds = gen_sbm_cluster(&spec).unwrap();
        for g in ds.graphs() {
            assert_eq!(g.edges().len(), 6);
            let comps = connected_components(g);
            assert_eq!(comps.len(), 2);
            let labels = g.node_labels().unwrap();
            for comp in comps {
                assert!(comp.iter().all(|&v| labels[v] == labels[comp[0]]));
            }
        }
    }

    #[test]
    fn fully_labeled_sbm_reveals_classes() {
        let spec = SbmSpec {
            labeled_fraction: 1.0,
            graphs: 3,
            ..Default::default()
        };
        let ds = gen_sbm_cluster(&spec).unwrap();
        for g in ds.graphs() {
            for (v, &y) in g.node_labels().unwrap().iter().enumerate() {
                assert_eq!(g.features().get(v, y), 1.0);
                assert_eq!(g.features().get(v, spec.blocks), 0.0);
            }
        }
    }

    #[test]
    fn default_sbm_has_one_key_node_per_block() {
        let spec = SbmSpec {
            graphs: 5,
            ..Default::default()
        };
        let ds = gen_sbm_cluster(&spec).unwrap();
        for g in ds.graphs() {
            let f = g.features();
            for b in 0..spec.blocks {
                let keys = (0..g.n()).filter(|&v| f.get(v, b) == 1.0).count();
                assert_eq!(keys, 1);
            }
        }
        assert!(SbmSpec { q: 0.6, ..spec }.validate().is_err());
    }

    /// Intra-block edge counts against Binomial(m choose 2, p).
    #[test]
    fn intra_block_edges_follow_binomial() {
        let spec = SbmSpec {
            blocks: 2,
            min_block_size: 10,
            max_block_size: 10,
            p: 0.55,
            q: 0.25,
            graphs: 200,
            seed: 17,
            ..Default::default()
        };
        let ds = gen_sbm_cluster(&spec).unwrap();
        let pairs = 45.0;
        let mut total = 0.0;
        let mut count = 0.0;
        for g in ds.graphs() {
            let labels = g.node_labels().unwrap();
            for b in 0..2 {
                let intra = g
                    .edges()
                    .iter()
                    .filter(|&&(u, v)| labels[u] == b && labels[v] == b)
                    .count();
                total += intra as f64;
                count += 1.0;
            }
        }
        let mean = total / count;
        let expected = spec.p * pairs;
        let sigma = (pairs * spec.p * (1.0 - spec.p) / count).sqrt();
        assert!((mean - expected).abs() < 3.0 * sigma, "mean {mean} vs {expected} ± {sigma}");
    }

    #[test]
    fn channel_generators_are_consistent_and_deterministic() {
        let f = gen_feature_only(50, 3).unwrap();
        assert_eq!(f, gen_feature_only(50, 3).unwrap());
        for g in f.graphs() {
            // Rewiring does not matter: the rule reads features only.
            let rewired = g.with_edges([]);
            assert_eq!(
                usize::from(feature_only_rule(rewired.features()) > 0.0),
                g.graph_label().unwrap()
            );
        }
        let s = gen_structure_only(50, 3).unwrap();
        assert_eq!(s, gen_structure_only(50, 3).unwrap());
        for g in s.graphs() {
            assert_eq!(connected_components(g).len(), g.graph_label().unwrap() + 1);
            assert_eq!(g.features(), &Tensor::ones(g.n(), 1));
        }
    }
}
