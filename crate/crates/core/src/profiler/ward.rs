//! Agglomerative clustering with Ward linkage.
//!
//! Leaves are numbered `0..n`; the cluster created by merge `s` gets id
//! `n + s`. Heights follow the usual convention for Ward on Euclidean
//! input: merging clusters `a` and `b` costs
//! `sqrt(2 |a| |b| / (|a| + |b|)) * ||centroid(a) - centroid(b)||`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller child id.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub id: usize,
}

/// Ward dendrogram over `points` via the Lance–Williams recurrence on
/// squared distances. Among equal-cost pairs the one with the smallest
/// `(a, b)` ids wins.
pub fn ward_linkage(points: &[Vec<f64>]) -> Result<Vec<Merge>> {
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::input("points must share one dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite coordinate in clustering input"));
    }

    // Active clusters: (id, size); d2[i][j] indexes positions in `active`.
    let mut active: Vec<(usize, usize)> = (0..n).map(|i| (i, 1)).collect();
    let mut d2: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq_dist(&points[i], &points[j])).collect())
        .collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    for step in 0..n.saturating_sub(1) {
        let m = active.len();
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..m {
            for j in i + 1..m {
                let (ia, ib) = order(active[i].0, active[j].0);
                let cand = (d2[i][j], ia, ib, i, j);
                best = match best {
                    None => Some(cand),
                    Some(b) if (cand.0, cand.1, cand.2) < (b.0, b.1, b.2) => Some(cand),
                    keep => keep,
                };
            }
        }
        let (dij, a, b, i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (active[i].1 as f64, active[j].1 as f64);
        let mut row = vec![0.0; m];
        for k in 0..m {
            if k == i || k == j {
                continue;
            }
            let nk = active[k].1 as f64;
            let t = ni + nj + nk;
            row[k] = (((ni + nk) * d2[i][k] + (nj + nk) * d2[j][k] - nk * dij) / t).max(0.0);
        }
        let id = n + step;
        merges.push(Merge {
            a,
            b,
            distance: dij.max(0.0).sqrt(),
            id,
        });

        // The merged cluster takes position i; position j is removed.
        active[i] = (id, active[i].1 + active[j].1);
        for k in 0..m {
            d2[i][k] = row[k];
            d2[k][i] = row[k];
        }
        active.remove(j);
        d2.remove(j);
        for r in &mut d2 {
            r.remove(j);
        }
    }
    check_monotone(&merges)?;
    Ok(merges)
}

/// Ward heights never decrease; a violation signals a numeric fault.
pub fn check_monotone(merges: &[Merge]) -> Result<()> {
    for w in merges.windows(2) {
        let tol = 1e-12 * w[0].distance.abs().max(1.0);
        if w[1].distance < w[0].distance - tol {
            return Err(Error::Numeric(format!(
                "Ward merge heights decreased: {} then {}",
                w[0].distance, w[1].distance
            )));
        }
    }
    Ok(())
}

/// Cuts the dendrogram into `k` clusters (clamped to `1..=n`). Cluster ids
/// are numbered by their smallest member.
pub fn flat_clusters(n: usize, merges: &[Merge], k: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let k = k.clamp(1, n.max(1));
    let mut parent: Vec<usize> = (0..2 * n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for m in merges.iter().take(n - k) {
        let ra = find(&mut parent, m.a);
        let rb = find(&mut parent, m.b);
        parent[ra] = m.id;
        parent[rb] = m.id;
    }
    let mut label_of_root = std::collections::HashMap::new();
    (0..n)
        .map(|i| {
            let r = find(&mut parent, i);
            let next = label_of_root.len();
            *label_of_root.entry(r).or_insert(next)
        })
        .collect()
}

/// Leaves in dendrogram order (depth first, child `a` before `b`).
pub fn leaf_order(n: usize, merges: &[Merge]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let root = if merges.is_empty() { 0 } else { n + merges.len() - 1 };
    let mut out = Vec::with_capacity(n);
    let mut stack = vec![root];
    while let Some(c) = stack.pop() {
        if c < n {
            out.push(c);
        } else {
            let m = &merges[c - n];
            stack.push(m.b);
            stack.push(m.a);
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn order(x: usize, y: usize) -> (usize, usize) {
    if x < y {
        (x, y)
    } else {
        (y, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_merge_at_zero() {
        let pts = vec![vec![0.3, 0.7]; 3];
        let merges = ward_linkage(&pts).unwrap();
        assert_eq!(merges.len(), 2);
        assert!(merges.iter().all(|m| m.distance == 0.0));
    }

    #[test]
    fn two_points_height_is_their_distance() {
        let merges = ward_linkage(&[vec![0.0, 0.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(merges[0], Merge { a: 0, b: 1, distance: 5.0, id: 2 });
    }

    #[test]
    fn separation_example() {
        let pts = vec![vec![0.0, 0.0], vec![0.05, 0.0], vec![1.0, 1.0]];
        let merges = ward_linkage(&pts).unwrap();
        assert_eq!((merges[0].a, merges[0].b), (0, 1));
        assert_eq!(flat_clusters(3, &merges, 2), vec![0, 0, 1]);
        // Third point joins the pair at sqrt(2 * 2 * 1 / 3) * ||c - p||.
        let c = [0.025, 0.0];
        let expected = (4.0f64 / 3.0).sqrt() * sq_dist(&c, &pts[2]).sqrt();
        assert!((merges[1].distance - expected).abs() < 1e-12);
    }

    #[test]
    fn cuts_and_leaf_order() {
        let pts: Vec<Vec<f64>> = [0.0, 0.1, 5.0, 5.1, 10.0].iter().map(|&x| vec![x]).collect();
        let merges = ward_linkage(&pts).unwrap();
        assert_eq!(flat_clusters(5, &merges, 1), vec![0; 5]);
        assert_eq!(flat_clusters(5, &merges, 5), vec![0, 1, 2, 3, 4]);
        assert_eq!(flat_clusters(5, &merges, 3), vec![0, 0, 1, 1, 2]);
        assert_eq!(flat_clusters(5, &merges, 99), vec![0, 1, 2, 3, 4]);
        let mut order = leaf_order(5, &merges);
        assert_eq!(order.len(), 5);
        order.sort_unstable();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn rejects_ragged_input() {
        assert!(ward_linkage(&[vec![0.0], vec![0.0, 1.0]]).is_err());
        assert!(check_monotone(&[
            Merge { a: 0, b: 1, distance: 1.0, id: 3 },
            Merge { a: 2, b: 3, distance: 0.5, id: 4 },
        ])
        .is_err());
    }
}
