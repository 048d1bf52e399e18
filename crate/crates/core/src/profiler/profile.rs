use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{run_protocol, EvalResult, RunRecord, TrainConfig};
use crate::graph::Dataset;
use crate::models::{ModelConfig, ModelKind};
use crate::par;
use crate::perturb::{apply, PerturbationKind};

/// Default margin above 0.5 under which a baseline counts as near chance.
pub const DEFAULT_CHANCE_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub perturbation: PerturbationKind,
    pub raw_auroc: f64,
    pub raw_std: f64,
    /// `raw_auroc / baseline`; exactly 1.0 for the identity entry.
    pub relative: f64,
}

/// Relative AUROC of one model on one dataset across a perturbation suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProfile {
    pub dataset: String,
    pub model: ModelKind,
    pub baseline: f64,
    /// Entries in suite order.
    pub entries: Vec<ProfileEntry>,
    /// Set when the baseline is too close to chance for stable ratios.
    pub near_chance: bool,
}

impl SensitivityProfile {
    /// Builds a profile from raw `(perturbation, mean, std)` scores. The
    /// baseline is the identity entry.
    pub fn from_raw(
        dataset: &str,
        model: ModelKind,
        raw: &[(PerturbationKind, f64, f64)],
        chance_margin: f64,
    ) -> Result<Self> {
        let baseline = raw
            .iter()
            .find(|(p, _, _)| *p == PerturbationKind::Identity)
            .map(|&(_, m, _)| m)
            .ok_or_else(|| Error::input("the perturbation suite must contain identity"))?;
        if !(baseline > 0.0) {
            return Err(Error::Eval(format!("baseline AUROC of {dataset} is {baseline}")));
        }
        let mut entries = Vec::with_capacity(raw.len());
        for &(perturbation, raw_auroc, raw_std) in raw {
            if !(0.0..=1.0).contains(&raw_auroc) {
                return Err(Error::Eval(format!("AUROC {raw_auroc} outside [0, 1]")));
            }
            let relative = if perturbation == PerturbationKind::Identity {
                1.0
            } else {
                raw_auroc / baseline
            };
            entries.push(ProfileEntry {
                perturbation,
                raw_auroc,
                raw_std,
                relative,
            });
        }
        Ok(SensitivityProfile {
            dataset: dataset.to_string(),
            model,
            baseline,
            entries,
            near_chance: baseline < 0.5 + chance_margin,
        })
    }

    pub fn suite(&self) -> Vec<PerturbationKind> {
        self.entries.iter().map(|e| e.perturbation).collect()
    }

    pub fn relative(&self, p: PerturbationKind) -> Option<f64> {
        self.entries.iter().find(|e| e.perturbation == p).map(|e| e.relative)
    }

    pub fn raw(&self, p: PerturbationKind) -> Option<f64> {
        self.entries.iter().find(|e| e.perturbation == p).map(|e| e.raw_auroc)
    }
}

/// A profile together with the per-run records behind it, in suite order.
#[derive(Debug, Clone)]
pub struct ProfileRun {
    pub profile: SensitivityProfile,
    pub results: Vec<EvalResult>,
}

impl ProfileRun {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.results.iter().flat_map(|r| r.runs.iter())
    }
}

pub fn compute_profile(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    suite: &[PerturbationKind],
) -> Result<SensitivityProfile> {
    profile_with_runs(ds, model_cfg, train_cfg, suite, DEFAULT_CHANCE_MARGIN).map(|r| r.profile)
}

/// Evaluates every perturbation of `suite` on `ds`. Perturbations that
/// produce an identical dataset (e.g. `fragmented-1` and `no-edges`) are
/// trained once and share the result.
pub fn profile_with_runs(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    suite: &[PerturbationKind],
    chance_margin: f64,
) -> Result<ProfileRun> {
    if !suite.contains(&PerturbationKind::Identity) {
        return Err(Error::input("the perturbation suite must contain identity"));
    }
    let mut distinct: Vec<Dataset> = Vec::new();
    let mut slot_of = Vec::with_capacity(suite.len());
    for &p in suite {
        let perturbed = apply(p, ds)?;
        let slot = match distinct.iter().position(|d| *d == perturbed) {
            Some(i) => i,
            None => {
                distinct.push(perturbed);
                distinct.len() - 1
            }
        };
        slot_of.push(slot);
    }

    let workers = par::resolve_workers(train_cfg.workers);
    let evaluated = par::par_map(&distinct, workers, |d| run_protocol(d, model_cfg, train_cfg));
    let evaluated: Vec<EvalResult> = evaluated.into_iter().collect::<Result<_>>()?;

    let mut results = Vec::with_capacity(suite.len());
    let mut raw = Vec::with_capacity(suite.len());
    for (&p, &slot) in suite.iter().zip(&slot_of) {
        let mut r = evaluated[slot].clone();
        r.set_perturbation(&p.to_string());
        raw.push((p, r.mean, r.std));
        results.push(r);
    }
    let profile = SensitivityProfile::from_raw(&ds.name, model_cfg.kind, &raw, chance_margin)?;
    Ok(ProfileRun { profile, results })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perturb::PerturbationKind::*;

    #[test]
    fn relative_is_a_ratio_to_identity() {
        let p = SensitivityProfile::from_raw(
            "d",
            ModelKind::Gcn,
            &[(Identity, 0.8, 0.01), (NoEdges, 0.6, 0.02)],
            DEFAULT_CHANCE_MARGIN,
        )
        .unwrap();
        assert_eq!(p.baseline, 0.8);
        assert_eq!(p.relative(Identity), Some(1.0));
        assert!((p.relative(NoEdges).unwrap() - 0.75).abs() < 1e-15);
        assert!(!p.near_chance);
    }

    #[test]
    fn relative_scores_depend_only_on_ratios() {
        let a = [(Identity, 0.8, 0.0), (NoEdges, 0.6, 0.0), (FullyConnected, 0.4, 0.0)];
        let b: Vec<_> = a.iter().map(|&(p, m, s)| (p, m * 0.5, s)).collect();
        let pa = SensitivityProfile::from_raw("d", ModelKind::Gcn, &a, 0.0).unwrap();
        let pb = SensitivityProfile::from_raw("d", ModelKind::Gcn, &b, 0.0).unwrap();
        for (x, y) in pa.entries.iter().zip(&pb.entries) {
            assert!((x.relative - y.relative).abs() < 1e-15);
        }
    }

    #[test]
    fn near_chance_baseline_is_flagged() {
        let p = SensitivityProfile::from_raw("d", ModelKind::Gcn, &[(Identity, 0.515, 0.0)], 0.02).unwrap();
        assert!(p.near_chance);
        assert!(SensitivityProfile::from_raw("d", ModelKind::Gcn, &[(NoEdges, 0.7, 0.0)], 0.02).is_err());
    }
}
