//! Graphs, datasets and the elementary graph algorithms used everywhere else.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

/// Simple undirected attributed graph.
///
/// Edges are stored canonically as `(u, v)` with `u < v`, sorted and
/// deduplicated, so two graphs with the same edge set compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    features: Tensor,
    node_labels: Option<Vec<usize>>,
    graph_label: Option<usize>,
}

impl Graph {
    /// Builds a graph, dropping self-loops and duplicate (or reversed) pairs.
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Tensor,
        node_labels: Option<Vec<usize>>,
        graph_label: Option<usize>,
    ) -> Result<Self> {
        if features.rows() != n {
            return Err(Error::input(format!(
                "feature matrix has {} rows for {} nodes",
                features.rows(),
                n
            )));
        }
        if let Some(labels) = &node_labels {
            if labels.len() != n {
                return Err(Error::input(format!(
                    "{} node labels for {} nodes",
                    labels.len(),
                    n
                )));
            }
        }
        let mut canon = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::input(format!(
                    "edge ({u}, {v}) out of range for {n} nodes"
                )));
            }
            if u != v {
                canon.push((u.min(v), u.max(v)));
            }
        }
        canon.sort_unstable();
        canon.dedup();
        Ok(Graph {
            n,
            edges: canon,
            features,
            node_labels,
            graph_label,
        })
    }

    /// Graph with constant-ones features of width 1 and no labels.
    pub fn unlabeled(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Graph::new(n, edges, Tensor::ones(n, 1), None, None)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    pub fn graph_label(&self) -> Option<usize> {
        self.graph_label
    }

    pub fn with_edges(&self, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        Graph::new(
            self.n,
            edges,
            self.features.clone(),
            self.node_labels.clone(),
            self.graph_label,
        )
        .expect("edges derived from a valid graph")
    }

    pub fn with_features(&self, features: Tensor) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::input("replacement features have the wrong row count"));
        }
        Ok(Graph {
            features,
            ..self.clone()
        })
    }

    pub fn with_graph_label(mut self, label: Option<usize>) -> Self {
        self.graph_label = label;
        self
    }

    /// Sorted neighbor lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Relabels node `v` as `perm[v]`, carrying features and labels along.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::input("permutation length differs from node count"));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::input("not a permutation"));
            }
        }
        let d = self.feature_dim();
        let mut feats = Tensor::zeros(self.n, d);
        for v in 0..self.n {
            feats.row_mut(perm[v]).copy_from_slice(self.features.row(v));
        }
        let labels = self.node_labels.as_ref().map(|l| {
            let mut out = vec![0; self.n];
            for v in 0..self.n {
                out[perm[v]] = l[v];
            }
            out
        });
        Graph::new(
            self.n,
            self.edges.iter().map(|&(u, v)| (perm[u], perm[v])),
            feats,
            labels,
            self.graph_label,
        )
    }
}

/// Entry `v` is the number of edges incident to `v`.
pub fn degrees(g: &Graph) -> Vec<usize> {
    let mut deg = vec![0; g.n];
    for &(u, v) in &g.edges {
        deg[u] += 1;
        deg[v] += 1;
    }
    deg
}

/// Nodes reachable from `seed` in at most `radius` hops through nodes that
/// satisfy `allowed`. Returned sorted; always contains `seed`.
pub fn bfs_ball(
    g: &Graph,
    seed: usize,
    radius: usize,
    allowed: impl Fn(usize) -> bool,
) -> Result<Vec<usize>> {
    if seed >= g.n {
        return Err(Error::input(format!(
            "seed {seed} out of range for {} nodes",
            g.n
        )));
    }
    Ok(ball_in(&g.adjacency(), seed, radius, allowed))
}

pub(crate) fn ball_in(
    adj: &[Vec<usize>],
    seed: usize,
    radius: usize,
    allowed: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    dist[seed] = 0;
    let mut queue = VecDeque::from([seed]);
    let mut ball = vec![seed];
    while let Some(u) = queue.pop_front() {
        if dist[u] == radius {
            continue;
        }
        for &w in &adj[u] {
            if dist[w] == usize::MAX && allowed(w) {
                dist[w] = dist[u] + 1;
                ball.push(w);
                queue.push_back(w);
            }
        }
    }
    ball.sort_unstable();
    ball
}

/// Connected components, each sorted, ordered by smallest member.
pub fn connected_components(g: &Graph) -> Vec<Vec<usize>> {
    let adj = g.adjacency();
    let mut seen = vec![false; g.n];
    let mut out = Vec::new();
    for start in 0..g.n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &w in &adj[u] {
                if !seen[w] {
                    seen[w] = true;
                    comp.push(w);
                    stack.push(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    GraphClassification,
    NodeClassificationInductive,
    NodeClassificationTransductive,
}

impl TaskKind {
    pub fn is_node_level(self) -> bool {
        !matches!(self, TaskKind::GraphClassification)
    }
}

/// Fixed train/validation/test index sets. Indices are graph ids for
/// inductive tasks and node ids for transductive ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitSpec {
    pub fn validate(&self, range: usize) -> Result<()> {
        let mut all = BTreeSet::new();
        for (name, set) in [
            ("train", &self.train),
            ("validation", &self.validation),
            ("test", &self.test),
        ] {
            if set.is_empty() {
                return Err(Error::input(format!("split set `{name}` is empty")));
            }
            for &i in set {
                if i >= range {
                    return Err(Error::input(format!(
                        "split index {i} out of range {range}"
                    )));
                }
                if !all.insert(i) {
                    return Err(Error::input(format!("split index {i} appears twice")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    graphs: Vec<Graph>,
    task: TaskKind,
    num_classes: usize,
    split: Option<SplitSpec>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        graphs: Vec<Graph>,
        task: TaskKind,
        num_classes: usize,
        split: Option<SplitSpec>,
    ) -> Result<Self> {
        let ds = Dataset {
            name: name.into(),
            graphs,
            task,
            num_classes,
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::input("num_classes must be positive"));
        }
        if self.task == TaskKind::NodeClassificationTransductive && self.graphs.len() != 1 {
            return Err(Error::input(
                "transductive datasets hold exactly one graph",
            ));
        }
        if let Some(first) = self.graphs.first() {
            let d = first.feature_dim();
            if self.graphs.iter().any(|g| g.feature_dim() != d) {
                return Err(Error::input("feature width differs between graphs"));
            }
        }
        for (i, g) in self.graphs.iter().enumerate() {
            match self.task {
                TaskKind::GraphClassification => match g.graph_label {
                    None => {
                        return Err(Error::input(format!("graph {i} has no graph label")))
                    }
                    Some(l) if l >= self.num_classes => {
                        return Err(Error::input(format!("graph {i} label {l} out of range")))
                    }
                    _ => {}
                },
                _ => match &g.node_labels {
                    None => {
                        return Err(Error::input(format!("graph {i} has no node labels")))
                    }
                    Some(ls) => {
                        if let Some(&l) = ls.iter().find(|&&l| l >= self.num_classes) {
                            return Err(Error::input(format!(
                                "graph {i} node label {l} out of range"
                            )));
                        }
                    }
                },
            }
        }
        if let Some(split) = &self.split {
            split.validate(self.num_units())?;
        }
        Ok(())
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn task(&self) -> TaskKind {
        self.task
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> Option<&SplitSpec> {
        self.split.as_ref()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs.first().map_or(0, Graph::feature_dim)
    }

    /// Number of splittable units: nodes for transductive tasks, graphs otherwise.
    pub fn num_units(&self) -> usize {
        match self.task {
            TaskKind::NodeClassificationTransductive => {
                self.graphs.first().map_or(0, Graph::n)
            }
            _ => self.graphs.len(),
        }
    }

    /// Stratification labels per unit. Inductive node tasks have no
    /// per-graph class, so every graph gets label 0.
    pub fn unit_labels(&self) -> Vec<usize> {
        match self.task {
            TaskKind::GraphClassification => self
                .graphs
                .iter()
                .map(|g| g.graph_label.unwrap_or(0))
                .collect(),
            TaskKind::NodeClassificationInductive => vec![0; self.graphs.len()],
            TaskKind::NodeClassificationTransductive => self.graphs[0]
                .node_labels
                .clone()
                .unwrap_or_default(),
        }
    }

    /// Same metadata, new graphs. Used by the perturbations, which keep
    /// labels and node counts intact.
    pub fn map_graphs(&self, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.len() != self.graphs.len() {
            return Err(Error::input("graph count changed"));
        }
        Dataset::new(
            self.name.clone(),
            graphs,
            self.task,
            self.num_classes,
            self.split.clone(),
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}
