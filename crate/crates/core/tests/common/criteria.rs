//! Checks shared by the acceptance suite and the faster integration tests.
//! Each returns `Ok(detail)` on success and `Err(detail)` on failure.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use graphtax::data::{gen_feature_only, gen_sbm_cluster, gen_structure_only, SbmSpec};
use graphtax::eval::{auroc, TrainConfig};
use graphtax::graph::connected_components;
use graphtax::models::{assemble, ModelConfig, ModelKind};
use graphtax::nn::{grad_check, GradCheckConfig, Mode, Tensor};
use graphtax::perturb::{apply, fragment_assignment, fragmented, PerturbationKind, SeedPolicy};
use graphtax::profiler::{cluster_profiles, compute_profile, flat_clusters, ward_linkage, SensitivityProfile};
use graphtax::{Graph, TaskKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

pub type Outcome = std::result::Result<String, String>;

fn oracle_suite() -> Vec<PerturbationKind> {
    let mut suite = vec![
        PerturbationKind::Identity,
        PerturbationKind::NoNodeFeatures,
        PerturbationKind::NodeDegree,
        PerturbationKind::NoEdges,
        PerturbationKind::FullyConnected,
    ];
    for k in 1..=4 {
        for seed_policy in [SeedPolicy::LowestId, SeedPolicy::HighestDegreeThenLowestId] {
            suite.push(PerturbationKind::Fragmented { k, seed_policy });
        }
    }
    suite
}

pub fn test_graphs(random: usize, exhaustive_n: usize) -> Vec<Graph> {
    let mut graphs = all_small_graphs(exhaustive_n, 1);
    graphs.extend(random_graphs(random, 8, 2));
    graphs
}

/// Perturbation outputs against the brute-force constructions.
pub fn perturbation_oracle(graphs: &[Graph]) -> Outcome {
    let start = Instant::now();
    let ds = dataset_of(graphs.to_vec());
    let mut checked = 0;
    for p in oracle_suite() {
        let got = apply(p, &ds).map_err(|e| e.to_string())?;
        let want = oracle_perturb(p, graphs);
        for (i, ((g, h), (edges, feats))) in graphs.iter().zip(got.graphs()).zip(&want).enumerate() {
            let got_edges: BTreeSet<(usize, usize)> = h.edges().iter().copied().collect();
            let got_feats: Vec<Vec<f64>> = (0..h.n()).map(|v| h.features().row(v).to_vec()).collect();
            if h.n() != g.n() || &got_edges != edges || &got_feats != feats || h.graph_label() != g.graph_label() {
                return Err(format!("{p} differs from the oracle on graph {i} ({} nodes)", g.n()));
            }
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{checked} graph outputs match exactly in {secs:.1}s");
    if secs < 60.0 {
        Ok(detail)
    } else {
        Err(format!("{detail} (over the 60s budget)"))
    }
}

/// Fragmented(1) = NoEdges; large k = Identity on connected graphs;
/// fragments are connected with diameter at most 2(k-1).
pub fn fragmentation_identities(graphs: &[Graph]) -> Outcome {
    let mut connected = 0;
    for (i, g) in graphs.iter().enumerate() {
        for policy in [SeedPolicy::LowestId, SeedPolicy::HighestDegreeThenLowestId] {
            if fragmented(g, 1, policy) != graphtax::perturb::no_edges(g) {
                return Err(format!("graph {i}: fragmented-1 differs from no-edges"));
            }
        }
        let adj = adjacency_matrix(g);
        let all: Vec<usize> = (0..g.n()).collect();
        if let Some(diam) = diameter_within(&adj, &all) {
            connected += 1;
            for k in [diam + 1, diam + 2] {
                for policy in [SeedPolicy::LowestId, SeedPolicy::HighestDegreeThenLowestId] {
                    if fragmented(g, k, policy) != *g {
                        return Err(format!("graph {i}: fragmented-{k} is not the identity (diameter {diam})"));
                    }
                }
            }
        }
        for k in 1..=4 {
            for policy in [SeedPolicy::LowestId, SeedPolicy::HighestDegreeThenLowestId] {
                let frag = fragment_assignment(g, k, policy);
                let ids: BTreeSet<usize> = frag.iter().copied().collect();
                for id in ids {
                    let members: Vec<usize> = (0..g.n()).filter(|&v| frag[v] == id).collect();
                    match diameter_within(&adj, &members) {
                        None => return Err(format!("graph {i}, k={k}: fragment {id} is disconnected")),
                        Some(d) if d > 2 * (k - 1) => {
                            return Err(format!("graph {i}, k={k}: fragment {id} has diameter {d}"))
                        }
                        Some(_) => {}
                    }
                }
            }
        }
    }
    Ok(format!("{} graphs ({connected} connected), k = 1..4, both seed policies", graphs.len()))
}

fn random_graph(n: usize, feat_dim: usize, p: f64, rng: &mut ChaCha8Rng) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    let feats = Tensor::from_vec(n, feat_dim, (0..n * feat_dim).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    Graph::new(n, edges, feats, None, Some(1)).unwrap()
}

/// Finite-difference check of the full network loss for every model kind.
pub fn gradient_checks(samples_per_param: usize) -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let g = random_graph(6, 3, 0.5, &mut rng);
    let mut report = Vec::new();
    for kind in ModelKind::ALL {
        let cfg = ModelConfig::new(kind);
        let model = assemble(&cfg, 3, 2, TaskKind::GraphClassification, 5).map_err(|e| e.to_string())?;
        let batch = model.batch(&[&g]).map_err(|e| e.to_string())?;
        let mut store = model.store.clone();
        let worst = grad_check(
            |s| {
                let mut f = model.forward_with(s, &batch, Mode::Train, 0)?;
                let loss = f.tape.cross_entropy(f.logits, &[0], &[1])?;
                Ok((f.tape, loss))
            },
            &mut store,
            GradCheckConfig {
                samples_per_param,
                ..Default::default()
            },
        )
        .map_err(|e| format!("{kind}: {e}"))?;
        report.push(format!("{kind} {worst:.2e}"));
        if !(worst < 1e-4) {
            return Err(format!("{kind}: max relative error {worst:.3e} >= 1e-4"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("max relative error {} in {secs:.1}s", report.join(", "));
    if secs < 60.0 {
        Ok(detail)
    } else {
        Err(format!("{detail} (over the 60s budget)"))
    }
}

/// Graph-level logits under random node relabelings, eval mode.
pub fn permutation_invariance(perms: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst: f64 = 0.0;
    for kind in ModelKind::ALL {
        let model = assemble(&ModelConfig::new(kind), 3, 3, TaskKind::GraphClassification, 9).map_err(|e| e.to_string())?;
        let g = random_graph(12, 3, 0.35, &mut rng);
        let base = logits(&model, &g)?;
        for _ in 0..perms {
            let perm = permutation(g.n(), &mut rng);
            let gp = g.permuted(&perm).map_err(|e| e.to_string())?;
            let diff = base.max_abs_diff(&logits(&model, &gp)?);
            worst = worst.max(diff);
            if !(diff <= 1e-6) {
                return Err(format!("{kind}: logits moved by {diff:.3e}"));
            }
        }
    }
    Ok(format!("{perms} permutations per model, max |diff| {worst:.2e}"))
}

fn logits(model: &graphtax::models::GnnModel, g: &Graph) -> Result<Tensor, String> {
    let batch = model.batch(&[g]).map_err(|e| e.to_string())?;
    let f = model.forward(&batch, Mode::Eval, 0).map_err(|e| e.to_string())?;
    Ok(f.tape.value(f.logits).clone())
}

/// Library AUROC against the pairwise oracle on random instances.
pub fn auroc_oracle(instances: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for t in 0..instances {
        let n = rng.gen_range(2..=50);
        let classes = if t % 2 == 0 { 2 } else { rng.gen_range(3..=5) };
        let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores make ties common.
        let coarse = rng.gen_bool(0.5);
        let mut probs = Tensor::zeros(n, classes);
        for r in 0..n {
            for c in 0..classes {
                let v: f64 = rng.gen();
                probs.set(r, c, if coarse { (v * 5.0).round() / 5.0 } else { v });
            }
        }
        let got = auroc(&probs, &labels).map_err(|e| e.to_string())?;
        let column = |c: usize| (0..n).map(|r| probs.get(r, c)).collect::<Vec<_>>();
        let want = if classes == 2 {
            let pos: Vec<bool> = labels.iter().map(|&l| l == 1).collect();
            brute_auroc(&column(1), &pos).unwrap()
        } else {
            let per: Vec<f64> = (0..classes)
                .filter_map(|c| {
                    let pos: Vec<bool> = labels.iter().map(|&l| l == c).collect();
                    brute_auroc(&column(c), &pos)
                })
                .collect();
            per.iter().sum::<f64>() / per.len() as f64
        };
        let diff = (got - want).abs();
        worst = worst.max(diff);
        if !(diff <= 1e-12) {
            return Err(format!("instance {t}: {got} vs oracle {want}"));
        }
    }
    Ok(format!("{instances} instances, max |diff| {worst:.1e}"))
}

fn members(n: usize, merges: &[graphtax::profiler::Merge]) -> Vec<Vec<usize>> {
    let mut sets: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in merges {
        let mut s = sets[m.a].clone();
        s.extend(&sets[m.b]);
        s.sort_unstable();
        sets.push(s);
    }
    sets
}

/// Ward linkage against exhaustive agglomeration, then planted blobs.
pub fn ward_oracle(trials: usize, blob_trials: usize) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut worst: f64 = 0.0;
    for t in 0..trials {
        let n = rng.gen_range(2..=6);
        let dim = rng.gen_range(1..=4);
        let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect();
        let merges = ward_linkage(&pts).map_err(|e| e.to_string())?;
        let sets = members(n, &merges);
        let oracle = brute_ward(&pts);
        for (step, (m, (a, b, h))) in merges.iter().zip(&oracle).enumerate() {
            let mut got = [sets[m.a].clone(), sets[m.b].clone()];
            let mut want = [a.clone(), b.clone()];
            got.sort();
            want.sort();
            if got != want {
                return Err(format!("trial {t}, merge {step}: {got:?} vs oracle {want:?}"));
            }
            let diff = (m.distance - h).abs();
            worst = worst.max(diff);
            if !(diff <= 1e-9) {
                return Err(format!("trial {t}, merge {step}: height {} vs oracle {h}", m.distance));
            }
        }
    }
    for t in 0..blob_trials {
        let dim = rng.gen_range(2..=5);
        let first = rng.gen_range(1..=5);
        let center_a: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        let gap = rng.gen_range(2.2..4.0);
        let center_b: Vec<f64> = center_a.iter().zip(&dir).map(|(c, d)| c + gap * d / norm).collect();
        let jitter = |c: &[f64], rng: &mut ChaCha8Rng| -> Vec<f64> {
            c.iter().map(|x| x + rng.gen_range(-0.02..0.02)).collect()
        };
        let planted: Vec<usize> = (0..6).map(|i| usize::from(i >= first)).collect();
        let pts: Vec<Vec<f64>> = planted
            .iter()
            .map(|&b| if b == 0 { jitter(&center_a, &mut rng) } else { jitter(&center_b, &mut rng) })
            .collect();
        let merges = ward_linkage(&pts).map_err(|e| e.to_string())?;
        let cut = flat_clusters(6, &merges, 2);
        if cut != planted {
            return Err(format!("blob trial {t}: cut {cut:?}, planted {planted:?}"));
        }
    }
    Ok(format!(
        "{trials} trials match exhaustive linkage (max |diff| {worst:.1e}); {blob_trials}/{blob_trials} blob splits recovered"
    ))
}

fn relative(p: &SensitivityProfile, kind: PerturbationKind) -> f64 {
    p.relative(kind).expect("perturbation in suite")
}

/// GCN profile signatures on the two single-channel generators.
pub fn channel_isolation(graphs: usize, cfg: &TrainConfig) -> Outcome {
    use PerturbationKind::*;
    let model = ModelConfig::new(ModelKind::Gcn);
    let suite = [Identity, NoEdges, NoNodeFeatures];
    let mut lines = Vec::new();
    let mut ok = true;

    let start = Instant::now();
    let fo = gen_feature_only(graphs, 1).map_err(|e| e.to_string())?;
    let p = compute_profile(&fo, &model, cfg, &suite).map_err(|e| e.to_string())?;
    let (ne, nf) = (relative(&p, NoEdges), relative(&p, NoNodeFeatures));
    ok &= ne >= 0.95 && nf <= 0.75;
    lines.push(format!(
        "feature_only: baseline {:.3}, rel(no-edges) {ne:.3} (>= 0.95), rel(no-node-features) {nf:.3} (<= 0.75), {:.0}s",
        p.baseline,
        start.elapsed().as_secs_f64()
    ));

    let start = Instant::now();
    let so = gen_structure_only(graphs, 1).map_err(|e| e.to_string())?;
    let p = compute_profile(&so, &model, cfg, &suite).map_err(|e| e.to_string())?;
    let (ne, nf) = (relative(&p, NoEdges), relative(&p, NoNodeFeatures));
    ok &= ne <= 0.7 && nf >= 0.9;
    lines.push(format!(
        "structure_only: baseline {:.3}, rel(no-edges) {ne:.3} (<= 0.7), rel(no-node-features) {nf:.3} (>= 0.9), {:.0}s",
        p.baseline,
        start.elapsed().as_secs_f64()
    ));
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Fraction of SBM graphs left bitwise unchanged by `fragmented-3`.
pub fn sbm_unchanged_fraction(spec: &SbmSpec) -> Result<f64, String> {
    let ds = gen_sbm_cluster(spec).map_err(|e| e.to_string())?;
    let f3 = apply(PerturbationKind::fragmented(3), &ds).map_err(|e| e.to_string())?;
    let same = ds.graphs().iter().zip(f3.graphs()).filter(|(a, b)| a == b).count();
    Ok(same as f64 / ds.graphs().len() as f64)
}

/// Retention of the GCN score under fragmentation on the CLUSTER-style SBM.
pub fn sbm_retention(spec: &SbmSpec, cfg: &TrainConfig) -> Outcome {
    let unchanged = sbm_unchanged_fraction(spec)?;
    let ds = gen_sbm_cluster(spec).map_err(|e| e.to_string())?;
    let suite = [
        PerturbationKind::Identity,
        PerturbationKind::fragmented(2),
        PerturbationKind::fragmented(3),
    ];
    let start = Instant::now();
    let p = compute_profile(&ds, &ModelConfig::new(ModelKind::Gcn), cfg, &suite).map_err(|e| e.to_string())?;
    let (f2, f3) = (relative(&p, suite[1]), relative(&p, suite[2]));
    let detail = format!(
        "baseline {:.3}, rel(fragmented-2) {f2:.3} (>= 0.95), rel(fragmented-3) {f3:.3} (>= 0.95), \
         {:.1}% graphs unchanged by fragmented-3 (>= 95%), {:.0}s",
        p.baseline,
        100.0 * unchanged,
        start.elapsed().as_secs_f64()
    );
    if f2 >= 0.95 && f3 >= 0.95 && unchanged >= 0.95 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Profiles the three synthetic families for one seed and reports whether
/// a two-cluster cut separates feature_only from structure_only.
pub fn taxonomy_separates(
    seed: u64,
    graphs: usize,
    sbm_graphs: usize,
    model: &ModelConfig,
    cfg: &TrainConfig,
    suite: &[PerturbationKind],
) -> Result<bool, String> {
    let cfg = TrainConfig { seed, ..*cfg };
    let datasets = [
        gen_feature_only(graphs, seed),
        gen_structure_only(graphs, seed),
        gen_sbm_cluster(&SbmSpec {
            graphs: sbm_graphs,
            seed,
            ..Default::default()
        }),
    ];
    let mut profiles = Vec::new();
    for ds in datasets {
        let ds = ds.map_err(|e| e.to_string())?;
        profiles.push(compute_profile(&ds, model, &cfg, suite).map_err(|e| e.to_string())?);
    }
    let t = cluster_profiles(&profiles, 2).map_err(|e| e.to_string())?;
    Ok(t.cluster_of("feature_only") != t.cluster_of("structure_only"))
}

/// Runs `graphtax all` and returns the bytes of the profiles CSV and the
/// taxonomy JSON.
pub fn run_all(bin: &Path, config: &Path, out: &Path, workers: &str) -> Result<(Vec<u8>, Vec<u8>), String> {
    let status = Command::new(bin)
        .args(["all", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("GRAPHTAX_WORKERS", workers)
        .status()
        .map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("graphtax all exited with {status}"));
    }
    let read = |name: &str| std::fs::read(out.join(name)).map_err(|e| format!("{name}: {e}"));
    Ok((read("profiles.csv")?, read("taxonomy.json")?))
}

/// Connected-component count, used by fixture sanity checks.
pub fn components(g: &Graph) -> usize {
    connected_components(g).len()
}
