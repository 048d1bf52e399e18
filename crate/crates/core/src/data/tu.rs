//! TU text format (`<name>_A.txt`, `<name>_graph_indicator.txt`, ...) with a
//! small JSON sidecar for task kind, class count and split.
//!
//! Files written here:
//!
//! * `<name>_A.txt`: `u, v` per line, 1-based global node ids, both directions
//! * `<name>_graph_indicator.txt`: 1-based graph id of every node
//! * `<name>_graph_labels.txt`: one class per graph (graph tasks)
//! * `<name>_node_attributes.txt`: comma-separated features per node
//! * `<name>_node_targets.txt`: node classes (node tasks)
//! * `<name>_meta.json`: [`Meta`]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, SplitSpec, TaskKind};
use crate::nn::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub task: TaskKind,
    pub num_classes: usize,
    pub num_graphs: usize,
    pub feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSpec>,
}

fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn load_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Load {
        file: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_int(path: &Path, line: usize, s: &str) -> Result<i64> {
    s.trim()
        .parse()
        .map_err(|_| load_err(path, line, format!("expected an integer, found `{s}`")))
}

fn read_ints(path: &Path) -> Result<Vec<(usize, i64)>> {
    read_lines(path)?
        .into_iter()
        .map(|(ln, l)| Ok((ln, parse_int(path, ln, &l)?)))
        .collect()
}

/// Sorted distinct values mapped to `0..k`.
fn dense_remap(values: impl IntoIterator<Item = i64>) -> BTreeMap<i64, usize> {
    let set: BTreeSet<i64> = values.into_iter().collect();
    set.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
}

/// Loads `<dir>/<name>_*.txt`.
pub fn load_tu(dir: &Path, name: &str) -> Result<Dataset> {
    let meta_path = dir.join(format!("{name}_meta.json"));
    let meta: Option<Meta> = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| load_err(&meta_path, e.line(), e.to_string()))?)
    } else {
        None
    };
    let task = meta.as_ref().map_or(TaskKind::GraphClassification, |m| m.task);

    // Node -> graph assignment.
    let ind_path = file(dir, name, "graph_indicator");
    let indicator = read_ints(&ind_path)?;
    let total = indicator.len();
    let mut graph_of = Vec::with_capacity(total);
    let mut local = Vec::with_capacity(total);
    let mut sizes: Vec<usize> = Vec::new();
    for &(ln, g) in &indicator {
        if g < 1 {
            return Err(load_err(&ind_path, ln, "graph ids are 1-based"));
        }
        let g = (g - 1) as usize;
        if g >= sizes.len() {
            sizes.resize(g + 1, 0);
        }
        graph_of.push(g);
        local.push(sizes[g]);
        sizes[g] += 1;
    }

    // Graph labels determine the graph count for graph tasks.
    let gl_path = file(dir, name, "graph_labels");
    let graph_labels: Option<Vec<usize>> = if task == TaskKind::GraphClassification || gl_path.exists() {
        let raw = read_ints(&gl_path)?;
        if raw.len() < sizes.len() {
            return Err(load_err(
                &gl_path,
                raw.len(),
                format!("{} graph labels for {} graphs", raw.len(), sizes.len()),
            ));
        }
        if meta.is_some() {
            let mut out = Vec::with_capacity(raw.len());
            for (ln, v) in raw {
                if v < 0 {
                    return Err(load_err(&gl_path, ln, "negative class id"));
                }
                out.push(v as usize);
            }
            Some(out)
        } else {
            let map = dense_remap(raw.iter().map(|r| r.1));
            Some(raw.iter().map(|r| map[&r.1]).collect())
        }
    } else {
        None
    };
    let num_graphs = meta
        .as_ref()
        .map(|m| m.num_graphs)
        .or(graph_labels.as_ref().map(Vec::len))
        .unwrap_or(sizes.len())
        .max(sizes.len());
    sizes.resize(num_graphs, 0);

    // Edges.
    let a_path = file(dir, name, "A");
    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (ln, l) in read_lines(&a_path)? {
        let parts: Vec<&str> = l.split(',').collect();
        if parts.len() != 2 {
            return Err(load_err(&a_path, ln, format!("expected `u, v`, found `{l}`")));
        }
        let u = parse_int(&a_path, ln, parts[0])?;
        let v = parse_int(&a_path, ln, parts[1])?;
        for id in [u, v] {
            if id < 1 || id as usize > total {
                return Err(load_err(&a_path, ln, format!("dangling node id {id}")));
            }
        }
        let (u, v) = ((u - 1) as usize, (v - 1) as usize);
        if graph_of[u] != graph_of[v] {
            return Err(load_err(&a_path, ln, "edge joins nodes of different graphs"));
        }
        edges[graph_of[u]].push((local[u], local[v]));
    }

    // Features: attributes, else one-hot node labels, else constant ones.
    let attr_path = file(dir, name, "node_attributes");
    let nl_path = file(dir, name, "node_labels");
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(total);
    let width;
    if attr_path.exists() {
        let lines = read_lines(&attr_path)?;
        if lines.len() != total {
            return Err(load_err(
                &attr_path,
                lines.len(),
                format!("{} attribute rows for {total} nodes", lines.len()),
            ));
        }
        for (ln, l) in &lines {
            let row = l
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| load_err(&attr_path, *ln, format!("bad number `{}`", s.trim())))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        width = rows.first().map_or(0, Vec::len);
        if let Some(pos) = rows.iter().position(|r| r.len() != width) {
            return Err(load_err(&attr_path, lines[pos].0, "attribute rows differ in width"));
        }
    } else if nl_path.exists() {
        let raw = read_ints(&nl_path)?;
        if raw.len() != total {
            return Err(load_err(&nl_path, raw.len(), format!("{} node labels for {total} nodes", raw.len())));
        }
        let map = dense_remap(raw.iter().map(|r| r.1));
        width = map.len();
        for (_, v) in raw {
            let mut row = vec![0.0; width];
            row[map[&v]] = 1.0;
            rows.push(row);
        }
    } else {
        width = meta.as_ref().map_or(1, |m| m.feature_dim);
        rows = vec![vec![1.0; width]; total];
    }

    // Node targets for node-level tasks.
    let nt_path = file(dir, name, "node_targets");
    let targets: Option<Vec<usize>> = if task.is_node_level() {
        let raw = read_ints(&nt_path)?;
        if raw.len() != total {
            return Err(load_err(&nt_path, raw.len(), format!("{} targets for {total} nodes", raw.len())));
        }
        Some(
            raw.into_iter()
                .map(|(ln, v)| {
                    usize::try_from(v).map_err(|_| load_err(&nt_path, ln, "negative class id"))
                })
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let mut per_graph_rows: Vec<Vec<f64>> = vec![Vec::new(); num_graphs];
    let mut per_graph_targets: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    for v in 0..total {
        per_graph_rows[graph_of[v]].extend_from_slice(&rows[v]);
        if let Some(t) = &targets {
            per_graph_targets[graph_of[v]].push(t[v]);
        }
    }
    let mut graphs = Vec::with_capacity(num_graphs);
    for (g, data) in per_graph_rows.into_iter().enumerate() {
        let feats = Tensor::from_vec(sizes[g], width, data)?;
        let node_labels = targets.as_ref().map(|_| std::mem::take(&mut per_graph_targets[g]));
        let label = graph_labels.as_ref().map(|l| l[g]);
        graphs.push(Graph::new(sizes[g], edges[g].drain(..), feats, node_labels, label)?);
    }
    let num_classes = match &meta {
        Some(m) => m.num_classes,
        None => graph_labels
            .as_ref()
            .and_then(|l| l.iter().max())
            .map_or(1, |m| m + 1),
    };
    let ds_name = meta.as_ref().map_or(name.to_string(), |m| m.name.clone());
    Dataset::new(ds_name, graphs, task, num_classes, meta.and_then(|m| m.split))
}

/// Writes `ds` under `dir` using `file_stem` as the TU name prefix.
pub fn write_tu(ds: &Dataset, dir: &Path, file_stem: &str) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut a = String::new();
    let mut indicator = String::new();
    let mut attrs = String::new();
    let mut targets = String::new();
    let mut graph_labels = String::new();
    let mut offset = 0;
    for (gi, g) in ds.graphs().iter().enumerate() {
        for &(u, v) in g.edges() {
            a.push_str(&format!("{}, {}\n", u + offset + 1, v + offset + 1));
            a.push_str(&format!("{}, {}\n", v + offset + 1, u + offset + 1));
        }
        for v in 0..g.n() {
            indicator.push_str(&format!("{}\n", gi + 1));
            let row: Vec<String> = g.features().row(v).iter().map(|x| format!("{x:?}")).collect();
            attrs.push_str(&row.join(", "));
            attrs.push('\n');
        }
        if let Some(labels) = g.node_labels() {
            for l in labels {
                targets.push_str(&format!("{l}\n"));
            }
        }
        if let Some(l) = g.graph_label() {
            graph_labels.push_str(&format!("{l}\n"));
        }
        offset += g.n();
    }
    let write = |suffix: &str, body: &str| -> Result<()> {
        let p = file(dir, file_stem, suffix);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };
    write("A", &a)?;
    write("graph_indicator", &indicator)?;
    if ds.feature_dim() > 0 {
        write("node_attributes", &attrs)?;
    }
    if ds.task() == TaskKind::GraphClassification {
        write("graph_labels", &graph_labels)?;
    } else {
        write("node_targets", &targets)?;
    }
    let meta = Meta {
        name: ds.name.clone(),
        task: ds.task(),
        num_classes: ds.num_classes(),
        num_graphs: ds.graphs().len(),
        feature_dim: ds.feature_dim(),
        split: ds.split().cloned(),
    };
    let p = dir.join(format!("{file_stem}_meta.json"));
    let body = serde_json::to_string_pretty(&meta).expect("meta serializes");
    fs::write(&p, body).map_err(|e| Error::io(&p, e))
}

/// Loads a dataset directory holding exactly one `<name>_A.txt`.
pub fn load_dir(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(Error::input(format!("dataset directory {} not found", dir.display())));
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut stems = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let fname = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = fname.strip_suffix("_A.txt") {
            stems.push(stem.to_string());
        }
    }
    stems.sort();
    match stems.as_slice() {
        [one] => load_tu(dir, one),
        [] => Err(Error::input(format!("no *_A.txt file in {}", dir.display()))),
        _ => Err(Error::input(format!(
            "several datasets in {}: {}",
            dir.display(),
            stems.join(", ")
        ))),
    }
}
