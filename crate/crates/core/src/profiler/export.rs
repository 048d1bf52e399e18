use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::{ProfileEntry, SensitivityProfile};
use super::ward::leaf_order;
use super::TaxonomyResult;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::perturb::PerturbationKind;

pub const PROFILES_HEADER: &str = "dataset,model,perturbation,raw_auroc,raw_std,relative_score,flag";

const FLAG_OK: &str = "ok";
const FLAG_NEAR_CHANCE: &str = "near-chance";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    dataset: String,
    model: ModelKind,
    perturbation: PerturbationKind,
    raw_auroc: f64,
    raw_std: f64,
    relative_score: f64,
    flag: String,
}

/// One row per (dataset, model, perturbation), profiles in the given order.
pub fn write_profiles_csv(profiles: &[SensitivityProfile], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in profiles {
        let flag = if p.near_chance { FLAG_NEAR_CHANCE } else { FLAG_OK };
        for e in &p.entries {
            w.serialize(Row {
                dataset: p.dataset.clone(),
                model: p.model,
                perturbation: e.perturbation,
                raw_auroc: e.raw_auroc,
                raw_std: e.raw_std,
                relative_score: e.relative,
                flag: flag.to_string(),
            })
            .map_err(|e| Error::Eval(format!("csv encoding: {e}")))?;
        }
    }
    let mut bytes = w.into_inner().map_err(|e| Error::Eval(format!("csv encoding: {e}")))?;
    if profiles.is_empty() {
        bytes = format!("{PROFILES_HEADER}\n").into_bytes();
    }
    write_file(path, &bytes)
}

/// Reads a profiles CSV back. Rows of one (dataset, model) pair form one
/// profile; profiles keep their first-appearance order.
pub fn read_profiles_csv(path: &Path) -> Result<Vec<SensitivityProfile>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().unwrap_or("").trim_end_matches('\r');
    if first != PROFILES_HEADER {
        return Err(Error::Load {
            file: path.to_path_buf(),
            line: 1,
            msg: format!("expected header `{PROFILES_HEADER}`"),
        });
    }
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut profiles: Vec<SensitivityProfile> = Vec::new();
    for (i, row) in rd.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::Load {
            file: path.to_path_buf(),
            line,
            msg: e.to_string(),
        })?;
        let near_chance = match row.flag.as_str() {
            FLAG_OK => false,
            FLAG_NEAR_CHANCE => true,
            other => {
                return Err(Error::Load {
                    file: path.to_path_buf(),
                    line,
                    msg: format!("unknown flag `{other}`"),
                })
            }
        };
        let entry = ProfileEntry {
            perturbation: row.perturbation,
            raw_auroc: row.raw_auroc,
            raw_std: row.raw_std,
            relative: row.relative_score,
        };
        match profiles
            .iter_mut()
            .find(|p| p.dataset == row.dataset && p.model == row.model)
        {
            Some(p) => {
                p.near_chance |= near_chance;
                p.entries.push(entry);
            }
            None => profiles.push(SensitivityProfile {
                dataset: row.dataset,
                model: row.model,
                baseline: f64::NAN,
                entries: vec![entry],
                near_chance,
            }),
        }
    }
    for p in &mut profiles {
        p.baseline = p.raw(PerturbationKind::Identity).ok_or_else(|| Error::Load {
            file: path.to_path_buf(),
            line: 0,
            msg: format!("no identity row for {} / {}", p.dataset, p.model),
        })?;
    }
    Ok(profiles)
}

#[derive(Serialize)]
struct TaxonomyJson<'a> {
    suite: Vec<String>,
    datasets: &'a [String],
    merges: Vec<(usize, usize, f64)>,
    clusters: BTreeMap<String, usize>,
}

pub fn taxonomy_json(t: &TaxonomyResult) -> String {
    let doc = TaxonomyJson {
        suite: t.suite.iter().map(|p| p.to_string()).collect(),
        datasets: &t.datasets,
        merges: t.merges.iter().map(|m| (m.a, m.b, m.distance)).collect(),
        clusters: t.cluster_map(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("taxonomy serializes");
    s.push('\n');
    s
}

pub fn write_taxonomy_json(t: &TaxonomyResult, path: &Path) -> Result<()> {
    write_file(path, taxonomy_json(t).as_bytes())
}

const CELL_W: f64 = 64.0;
const CELL_H: f64 = 26.0;
const DENDRO_W: f64 = 150.0;
const LABEL_W: f64 = 170.0;
const HEADER_H: f64 = 130.0;
const PAD: f64 = 12.0;

/// Heatmap of relative scores, rows in dendrogram leaf order with the
/// dendrogram drawn in the left margin. Colors diverge from white at 1.0:
/// red below, blue above, saturating half a unit away.
pub fn render_heatmap_svg(t: &TaxonomyResult, profiles: &[SensitivityProfile]) -> Result<String> {
    let n = t.datasets.len();
    let order = leaf_order(n, &t.merges);
    let rows: Vec<&SensitivityProfile> = order
        .iter()
        .map(|&i| {
            profiles
                .iter()
                .find(|p| p.dataset == t.datasets[i])
                .ok_or_else(|| Error::input(format!("no profile for dataset {}", t.datasets[i])))
        })
        .collect::<Result<_>>()?;
    let cols = t.suite.len();
    let grid_x = PAD + DENDRO_W + LABEL_W;
    let width = grid_x + cols as f64 * CELL_W + PAD;
    let height = HEADER_H + n as f64 * CELL_H + PAD;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);

    for (c, p) in t.suite.iter().enumerate() {
        let x = grid_x + (c as f64 + 0.5) * CELL_W;
        let y = HEADER_H - 6.0;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" transform="rotate(-45 {x} {y})">{}</text>"#,
            escape(&p.to_string())
        );
    }

    for (r, p) in rows.iter().enumerate() {
        let y = HEADER_H + r as f64 * CELL_H;
        let label = if p.near_chance {
            format!("{} *", p.dataset)
        } else {
            p.dataset.clone()
        };
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            grid_x - 6.0,
            y + CELL_H * 0.65,
            escape(&label)
        );
        for (c, kind) in t.suite.iter().enumerate() {
            let e = p
                .entries
                .iter()
                .find(|e| e.perturbation == *kind)
                .ok_or_else(|| Error::input(format!("{} lacks {kind}", p.dataset)))?;
            let x = grid_x + c as f64 * CELL_W;
            let _ = writeln!(
                s,
                r#"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white"><title>{} / {}: {:.4} (raw {:.4})</title></rect>"#,
                color(e.relative),
                escape(&p.dataset),
                kind,
                e.relative,
                e.raw_auroc
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{:.2}</text>"#,
                x + CELL_W / 2.0,
                y + CELL_H * 0.65,
                e.relative
            );
        }
    }

    draw_dendrogram(&mut s, t, &order);
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn write_heatmap_svg(t: &TaxonomyResult, profiles: &[SensitivityProfile], path: &Path) -> Result<()> {
    write_file(path, render_heatmap_svg(t, profiles)?.as_bytes())
}

fn draw_dendrogram(s: &mut String, t: &TaxonomyResult, order: &[usize]) {
    let n = t.datasets.len();
    if t.merges.is_empty() {
        return;
    }
    let top = t.merges.last().map(|m| m.distance).unwrap_or(0.0);
    let right = PAD + DENDRO_W;
    let x_of = |h: f64| {
        if top > 0.0 {
            right - DENDRO_W * h / top
        } else {
            right
        }
    };
    let mut pos = vec![(0.0, 0.0); n + t.merges.len()];
    for (r, &leaf) in order.iter().enumerate() {
        pos[leaf] = (right, HEADER_H + (r as f64 + 0.5) * CELL_H);
    }
    for m in &t.merges {
        let (xa, ya) = pos[m.a];
        let (xb, yb) = pos[m.b];
        let x = x_of(m.distance);
        let _ = writeln!(
            s,
            r##"<path class="dendrogram" d="M{xa} {ya}H{x}V{yb}H{xb}" fill="none" stroke="#444"/>"##
        );
        pos[m.id] = (x, (ya + yb) / 2.0);
    }
}

fn color(v: f64) -> String {
    let (target, t) = if v < 1.0 {
        ((178.0, 24.0, 43.0), ((1.0 - v) / 0.5).clamp(0.0, 1.0))
    } else {
        ((33.0, 102.0, 172.0), ((v - 1.0) / 0.5).clamp(0.0, 1.0))
    };
    let mix = |c: f64| (255.0 + (c - 255.0) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(target.0), mix(target.1), mix(target.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
