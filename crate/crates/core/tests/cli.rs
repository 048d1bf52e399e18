use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use graphtax::data::load_dir;
use graphtax::eval::EvalResult;
use graphtax::models::ModelKind;
use graphtax::perturb::PerturbationKind;
use graphtax::profiler::{write_profiles_csv, SensitivityProfile};

fn graphtax(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphtax"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let out = graphtax(&["run", "--definitely-not-a-flag"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = graphtax(&["run", "--dataset", s(&dir.path().join("missing"))]);
    assert_eq!(out.status.code(), Some(1));
    fs::write(dir.path().join("bad_A.txt"), "1, x\n").unwrap();
    fs::write(dir.path().join("bad_graph_indicator.txt"), "1\n").unwrap();
    fs::write(dir.path().join("bad_graph_labels.txt"), "1\n").unwrap();
    let out = graphtax(&["run", "--dataset", s(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad_A.txt:1"));
}

#[test]
fn gen_perturb_and_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fo");
    let out = graphtax(&["gen", "--kind", "feature-only", "--graphs", "30", "--seed", "2", "--out", s(&data)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let frag = dir.path().join("frag");
    let out = graphtax(&["perturb", "--in", s(&data), "--kind", "fragmented", "--k", "1", "--out", s(&frag)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let loaded = load_dir(&frag).unwrap();
    assert_eq!(loaded.graphs().len(), 30);
    assert!(loaded.graphs().iter().all(|g| g.edges().is_empty()));

    let out = graphtax(&[
        "run", "--dataset", s(&data), "--model", "gin", "--perturbation", "no-edges", "--epochs", "3", "--folds", "2",
        "--hidden-dim", "8",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: EvalResult = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r.scores.len(), 2);
    assert!(r.runs.iter().all(|run| run.perturbation == "no-edges" && run.model == "gin"));
}

#[test]
fn taxonomy_writes_json_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let raw = |a: f64, b: f64| [(PerturbationKind::Identity, 0.9, 0.0), (PerturbationKind::NoEdges, a, 0.0), (PerturbationKind::NoNodeFeatures, b, 0.0)];
    let profiles: Vec<SensitivityProfile> = [("a", 0.9, 0.5), ("b", 0.88, 0.52), ("c", 0.5, 0.9), ("d", 0.45, 0.88), ("e", 0.7, 0.7)]
        .iter()
        .map(|&(n, a, b)| SensitivityProfile::from_raw(n, ModelKind::Gcn, &raw(a, b), 0.02).unwrap())
        .collect();
    let csv = dir.path().join("p.csv");
    write_profiles_csv(&profiles, &csv).unwrap();
    let tax = dir.path().join("tax");
    let out = graphtax(&["taxonomy", "--profiles", s(&csv), "--clusters", "4", "--out", s(&tax)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(tax.join("taxonomy.json")).unwrap()).unwrap();
    assert_eq!(json["merges"].as_array().unwrap().len(), 4);
    assert_eq!(json["datasets"].as_array().unwrap().len(), 5);
    let ids: std::collections::BTreeSet<u64> = json["clusters"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(ids.len(), 4);
    let svg = fs::read_to_string(tax.join("heatmap.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches(r#"class="cell""#).count(), 5 * 3);
}

#[test]
fn all_is_deterministic_and_writes_a_run_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    fs::write(
        &config,
        r#"{
            "datasets": [
                {"source": "feature_only", "graphs": 24, "seed": 3},
                {"source": "structure_only", "graphs": 24, "seed": 3}
            ],
            "models": [{"kind": "gcn", "hidden_dim": 8}, {"kind": "cheb", "hidden_dim": 8}],
            "suite": ["identity", "no-edges", "no-node-features"],
            "train": {"epochs": 4, "folds": 2},
            "output_dir": "out"
        }"#,
    )
    .unwrap();
    let run = |seed: &str| {
        let out = graphtax(&["all", "--config", s(&config), "--seed", seed]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let o = dir.path().join("out");
        (fs::read(o.join("profiles.csv")).unwrap(), fs::read_to_string(o.join("runs.jsonl")).unwrap())
    };
    let (a, log) = run("5");
    let (b, _) = run("5");
    assert_eq!(a, b);
    // 2 models x 2 datasets x 3 perturbations x 2 folds.
    assert_eq!(log.lines().count(), 24);
    assert!(log.contains(r#""seed":"#));
    let o = dir.path().join("out");
    for m in ["gcn", "cheb"] {
        assert!(o.join(format!("taxonomy-{m}.json")).is_file());
        assert!(o.join(format!("heatmap-{m}.svg")).is_file());
    }
}
