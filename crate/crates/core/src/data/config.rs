use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synth::{gen_feature_only, gen_sbm_cluster, gen_structure_only, SbmSpec};
use super::tu::load_dir;
use crate::error::{Error, Result};
use crate::eval::TrainConfig;
use crate::graph::Dataset;
use crate::models::ModelConfig;
use crate::perturb::PerturbationKind;

/// Where a dataset comes from: a TU directory or a synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    Tu {
        path: PathBuf,
    },
    FeatureOnly {
        graphs: usize,
        #[serde(default)]
        seed: u64,
    },
    StructureOnly {
        graphs: usize,
        #[serde(default)]
        seed: u64,
    },
    SbmCluster(SbmSpec),
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Tu { path } => load_dir(path),
            DatasetSource::FeatureOnly { graphs, seed } => gen_feature_only(*graphs, *seed),
            DatasetSource::StructureOnly { graphs, seed } => gen_structure_only(*graphs, *seed),
            DatasetSource::SbmCluster(spec) => gen_sbm_cluster(spec),
        }
    }
}

/// The single JSON document driving `graphtax all`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSource>,
    pub models: Vec<ModelConfig>,
    pub suite: Vec<PerturbationKind>,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub workers: Option<usize>,
    pub clusters: usize,
    /// Baselines below `0.5 + chance_margin` are flagged.
    pub chance_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            datasets: Vec::new(),
            models: vec![ModelConfig::default()],
            suite: PerturbationKind::canonical_suite(),
            train: TrainConfig::default(),
            output_dir: PathBuf::from("graphtax-out"),
            seed: 0,
            workers: None,
            clusters: 4,
            chance_margin: 0.02,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::input(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Paths in the config are resolved against `base` (usually the
    /// config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        for d in &mut self.datasets {
            if let DatasetSource::Tu { path } = d {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.suite.is_empty() || !self.suite.contains(&PerturbationKind::Identity) {
            return Err(Error::input("the perturbation suite must contain identity"));
        }
        if self.datasets.is_empty() {
            return Err(Error::input("no datasets configured"));
        }
        if self.models.is_empty() {
            return Err(Error::input("no models configured"));
        }
        for d in &self.datasets {
            if let DatasetSource::Tu { path } = d {
                if !path.is_dir() {
                    return Err(Error::input(format!("dataset directory {} not found", path.display())));
                }
            }
            if let DatasetSource::SbmCluster(spec) = d {
                spec.validate()?;
            }
        }
        for m in &self.models {
            m.validate()?;
        }
        if self.clusters == 0 {
            return Err(Error::input("clusters must be positive"));
        }
        Ok(())
    }

    /// Training settings with the global seed and worker count applied.
    pub fn effective_train(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            workers: self.workers.or(self.train.workers),
            ..self.train
        }
    }
}
