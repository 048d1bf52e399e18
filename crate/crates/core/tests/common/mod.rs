//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's algorithms.

#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeSet;
use std::io::Write;

use graphtax::nn::Tensor;
use graphtax::perturb::{PerturbationKind, SeedPolicy};
use graphtax::{Dataset, Graph, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Writes a line that survives libtest output capture.
pub fn report(line: &str) {
    let _ = writeln!(std::io::stderr(), "{line}");
}

pub fn verdict(criterion: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    report(&format!("[{tag}] {criterion}: {detail}"));
}

fn random_features(n: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_vec(n, 2, (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Every labeled simple graph on `1..=max_n` nodes.
pub fn all_small_graphs(max_n: usize, seed: u64) -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for n in 1..=max_n {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        for mask in 0u64..(1 << pairs.len()) {
            let edges = pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &e)| e);
            out.push(Graph::new(n, edges, random_features(n, &mut rng), None, Some(0)).unwrap());
        }
    }
    out
}

/// Random graphs on `1..=max_n` nodes with a random edge density each.
pub fn random_graphs(count: usize, max_n: usize, seed: u64) -> Vec<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.gen_range(1..=max_n);
            let p: f64 = rng.gen();
            let mut edges = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    if rng.gen::<f64>() < p {
                        edges.push((u, v));
                    }
                }
            }
            Graph::new(n, edges, random_features(n, &mut rng), None, Some(0)).unwrap()
        })
        .collect()
}

pub fn dataset_of(graphs: Vec<Graph>) -> Dataset {
    Dataset::new("oracle", graphs, TaskKind::GraphClassification, 1, None).unwrap()
}

pub fn adjacency_matrix(g: &Graph) -> Vec<Vec<bool>> {
    let n = g.n();
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in g.edges() {
        a[u][v] = true;
        a[v][u] = true;
    }
    a
}

const INF: usize = usize::MAX / 4;

/// All-pairs hop distances restricted to the nodes in `alive`.
pub fn floyd_warshall(adj: &[Vec<bool>], alive: &[bool]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut d = vec![vec![INF; n]; n];
    for u in 0..n {
        if !alive[u] {
            continue;
        }
        d[u][u] = 0;
        for v in 0..n {
            if alive[v] && adj[u][v] {
                d[u][v] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d
}

pub fn is_connected_within(adj: &[Vec<bool>], nodes: &[usize]) -> bool {
    diameter_within(adj, nodes).is_some()
}

/// Diameter of the subgraph induced on `nodes`; `None` when disconnected.
pub fn diameter_within(adj: &[Vec<bool>], nodes: &[usize]) -> Option<usize> {
    let mut alive = vec![false; adj.len()];
    for &v in nodes {
        alive[v] = true;
    }
    let d = floyd_warshall(adj, &alive);
    let mut diam = 0;
    for &u in nodes {
        for &v in nodes {
            if d[u][v] >= INF {
                return None;
            }
            diam = diam.max(d[u][v]);
        }
    }
    Some(diam)
}

/// Fragmentation from scratch: repeatedly pick a seed among unassigned nodes
/// and claim every unassigned node at residual distance `< k`.
pub fn oracle_fragment_edges(g: &Graph, k: usize, policy: SeedPolicy) -> BTreeSet<(usize, usize)> {
    let n = g.n();
    let adj = adjacency_matrix(g);
    let degree: Vec<usize> = adj.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
    let mut frag = vec![None; n];
    let mut next = 0;
    while frag.iter().any(Option::is_none) {
        let unassigned: Vec<usize> = (0..n).filter(|&v| frag[v].is_none()).collect();
        let seed = match policy {
            SeedPolicy::LowestId => unassigned[0],
            SeedPolicy::HighestDegreeThenLowestId => *unassigned
                .iter()
                .max_by(|&&a, &&b| degree[a].cmp(&degree[b]).then(b.cmp(&a)))
                .unwrap(),
        };
        let alive: Vec<bool> = (0..n).map(|v| frag[v].is_none()).collect();
        let d = floyd_warshall(&adj, &alive);
        for &v in &unassigned {
            if d[seed][v] < k {
                frag[v] = Some(next);
            }
        }
        next += 1;
    }
    g.edges().iter().copied().filter(|&(u, v)| frag[u] == frag[v]).collect()
}

pub type EdgesAndFeatures = (BTreeSet<(usize, usize)>, Vec<Vec<f64>>);

/// Expected (edge set, feature rows) per graph under `p`, built directly
/// from set definitions.
pub fn oracle_perturb(p: PerturbationKind, graphs: &[Graph]) -> Vec<EdgesAndFeatures> {
    let feats = |g: &Graph| -> Vec<Vec<f64>> { (0..g.n()).map(|v| g.features().row(v).to_vec()).collect() };
    let edges = |g: &Graph| -> BTreeSet<(usize, usize)> { g.edges().iter().copied().collect() };
    let degree_vocab: BTreeSet<usize> = graphs
        .iter()
        .flat_map(|g| adjacency_matrix(g).into_iter().map(|r| r.iter().filter(|&&b| b).count()))
        .collect();
    let vocab: Vec<usize> = degree_vocab.into_iter().collect();
    graphs
        .iter()
        .map(|g| match p {
            PerturbationKind::Identity => (edges(g), feats(g)),
            PerturbationKind::NoNodeFeatures => (edges(g), vec![vec![1.0]; g.n()]),
            PerturbationKind::NodeDegree => {
                let rows = adjacency_matrix(g)
                    .iter()
                    .map(|r| {
                        let d = r.iter().filter(|&&b| b).count();
                        vocab.iter().map(|&x| if x == d { 1.0 } else { 0.0 }).collect()
                    })
                    .collect();
                (edges(g), rows)
            }
            PerturbationKind::NoEdges => (BTreeSet::new(), feats(g)),
            PerturbationKind::FullyConnected => {
                let n = g.n();
                let all = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
                (all, feats(g))
            }
            PerturbationKind::Fragmented { k, seed_policy } => (oracle_fragment_edges(g, k, seed_policy), feats(g)),
        })
        .collect()
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn brute_auroc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if positive[i] && !positive[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

/// Brute-force agglomeration: at each step scan every pair of current
/// clusters and merge the one with the smallest Ward cost computed from
/// centroids. Returns `(members_a, members_b, height)` per merge.
pub fn brute_ward(points: &[Vec<f64>]) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let centroid = |c: &[usize]| -> Vec<f64> {
        let dim = points[0].len();
        let mut m = vec![0.0; dim];
        for &i in c {
            for (a, b) in m.iter_mut().zip(&points[i]) {
                *a += b;
            }
        }
        m.iter().map(|x| x / c.len() as f64).collect()
    };
    let mut out = Vec::new();
    while clusters.len() > 1 {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (a, b) = (&clusters[i], &clusters[j]);
                let (ca, cb) = (centroid(a), centroid(b));
                let d2: f64 = ca.iter().zip(&cb).map(|(x, y)| (x - y) * (x - y)).sum();
                let (na, nb) = (a.len() as f64, b.len() as f64);
                let h = (2.0 * na * nb / (na + nb) * d2).sqrt();
                if h < best.0 {
                    best = (h, i, j);
                }
            }
        }
        let (h, i, j) = best;
        let b = clusters.remove(j);
        let a = clusters[i].clone();
        clusters[i].extend(&b);
        clusters[i].sort_unstable();
        out.push((a, b, h));
    }
    out
}

/// Random permutation of `0..n`.
pub fn permutation(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
