//! Splitting, AUROC, training, and the evaluation protocol: stratified
//! k-fold cross-validation when a dataset has no fixed split, repeated
//! seeded runs on the fixed split otherwise.

mod auroc;
mod split;
mod train;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use auroc::{auroc, binary_auroc};
pub use split::{stratified_holdout, stratified_kfold};
pub use train::{predict_units, train_job, validation_score, JobOutcome, UnitSplit};

use crate::error::{Error, Result};
use crate::graph::Dataset;
use crate::models::ModelConfig;
use crate::nn::AdamConfig;
use crate::par;

/// Fraction of diverged runs above which the whole protocol fails.
pub const MAX_DIVERGED_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub patience: usize,
    /// Graphs per mini-batch; transductive tasks always train full-batch.
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub folds: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Worker count for independent jobs; `None` means all cores.
    pub workers: Option<usize>,
    #[serde(skip)]
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            epochs: 200,
            patience: 30,
            batch_size: 32,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            adam_eps: adam.eps,
            folds: 10,
            repetitions: 10,
            seed: 0,
            workers: None,
            adam,
        }
    }
}

impl TrainConfig {
    /// Syncs the optimizer block with the flat fields and checks ranges.
    pub fn normalized(mut self) -> Result<Self> {
        if self.folds < 2 {
            return Err(Error::input("folds must be at least 2"));
        }
        if self.repetitions < 1 || self.epochs < 1 {
            return Err(Error::input("repetitions and epochs must be at least 1"));
        }
        if self.lr <= 0.0 {
            return Err(Error::input("learning rate must be positive"));
        }
        self.adam = AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        };
        Ok(self)
    }
}

/// One line of the JSON-lines run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub dataset: String,
    pub model: String,
    pub perturbation: String,
    pub fold_or_rep: usize,
    /// `None` for diverged runs.
    pub auroc: Option<f64>,
    pub epochs_ran: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    /// Test AUROC of each completed fold or repetition, in job order.
    pub scores: Vec<f64>,
    pub diverged: usize,
    pub wall_time_secs: f64,
    pub runs: Vec<RunRecord>,
}

impl EvalResult {
    pub fn set_perturbation(&mut self, name: &str) {
        for r in &mut self.runs {
            r.perturbation = name.to_string();
        }
    }
}

/// Per-job seed derived from the base seed (SplitMix64 finalizer).
pub fn derive_seed(base: u64, job: u64) -> u64 {
    let mut z = base ^ job.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Job {
    index: usize,
    split: UnitSplit,
    seed: u64,
}

/// The job list of the protocol: CV folds (each with a 10% stratified
/// validation slice of its training part) or seeded repetitions on the
/// fixed split.
fn plan_jobs(ds: &Dataset, cfg: &TrainConfig) -> Result<Vec<Job>> {
    if let Some(split) = ds.split() {
        return Ok((0..cfg.repetitions)
            .map(|r| Job {
                index: r,
                split: UnitSplit {
                    train: split.train.clone(),
                    validation: split.validation.clone(),
                    test: split.test.clone(),
                },
                seed: cfg.seed.wrapping_add(r as u64),
            })
            .collect());
    }
    let labels = ds.unit_labels();
    let folds = stratified_kfold(&labels, cfg.folds, cfg.seed)?;
    Ok(folds
        .iter()
        .enumerate()
        .map(|(f, test)| {
            let rest: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|&(g, _)| g != f)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let seed = derive_seed(cfg.seed, f as u64);
            let (train, validation) = stratified_holdout(&rest, &labels, 10, seed);
            Job {
                index: f,
                split: UnitSplit {
                    train,
                    validation,
                    test: test.clone(),
                },
                seed,
            }
        })
        .collect())
}

/// Trains and scores `model_cfg` on `ds` under the evaluation protocol.
pub fn run_protocol(ds: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig) -> Result<EvalResult> {
    let cfg = cfg.normalized()?;
    model_cfg.validate()?;
    let start = Instant::now();
    let jobs = plan_jobs(ds, &cfg)?;
    let workers = par::resolve_workers(cfg.workers);
    let outcomes = par::par_map(&jobs, workers, |job| {
        train_job(ds, model_cfg, &cfg, &job.split, job.seed).map(|(_, o)| o)
    });

    let mut scores = Vec::new();
    let mut runs = Vec::new();
    let mut diverged = 0;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        let (auroc, epochs_ran) = match outcome {
            Ok(o) => {
                scores.push(o.test_auroc);
                (Some(o.test_auroc), o.epochs_ran)
            }
            Err(Error::Numeric(_)) => {
                diverged += 1;
                (None, 0)
            }
            Err(e) => return Err(e),
        };
        runs.push(RunRecord {
            dataset: ds.name.clone(),
            model: model_cfg.kind.to_string(),
            perturbation: "identity".into(),
            fold_or_rep: job.index,
            auroc,
            epochs_ran,
            seed: job.seed,
        });
    }
    if diverged as f64 > MAX_DIVERGED_FRACTION * jobs.len() as f64 || scores.is_empty() {
        return Err(Error::Numeric(format!(
            "{diverged} of {} runs diverged on {}",
            jobs.len(),
            ds.name
        )));
    }
    let (mean, std) = mean_std(&scores);
    Ok(EvalResult {
        mean,
        std,
        scores,
        diverged,
        wall_time_secs: start.elapsed().as_secs_f64(),
        runs,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
