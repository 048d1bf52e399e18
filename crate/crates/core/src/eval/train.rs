//! One training job: fit on a set of units with early stopping on a
//! validation set, then score the held-out test units.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::auroc::auroc;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::graph::{Dataset, Graph, TaskKind};
use crate::models::{assemble, GnnModel, ModelConfig};
use crate::nn::{AdamState, Mode, ParamStore, Tensor};

/// Unit indices for one job (graph ids, or node ids for transductive tasks).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitSplit {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobOutcome {
    pub test_auroc: f64,
    pub best_validation: f64,
    /// Epoch (1-based) whose parameters were kept.
    pub best_epoch: usize,
    pub epochs_ran: usize,
}

const EVAL_CHUNK: usize = 256;

struct Snapshot {
    store: ParamStore,
    running: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Trains a freshly initialized model and returns it with its outcome.
pub fn train_job(
    ds: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    split: &UnitSplit,
    seed: u64,
) -> Result<(GnnModel, JobOutcome)> {
    if split.train.is_empty() || split.test.is_empty() {
        return Err(Error::input("train and test sets must be non-empty"));
    }
    let mut model = assemble(model_cfg, ds.feature_dim(), ds.num_classes(), ds.task(), seed)?;
    let mut adam = AdamState::new(&model.store, cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7261_696e);

    let mut best: Option<(f64, usize, Snapshot)> = None;
    let mut epochs_ran = 0;
    for epoch in 1..=cfg.epochs {
        epochs_ran = epoch;
        run_epoch(ds, &mut model, &mut adam, cfg, &split.train, &mut rng)?;
        let val = validation_score(ds, &model, &split.validation)?;
        let improved = best.as_ref().is_none_or(|(b, _, _)| val > *b);
        if improved {
            let snap = Snapshot {
                store: model.store.clone(),
                running: model.running_stats(),
            };
            best = Some((val, epoch, snap));
        } else if epoch - best.as_ref().map_or(0, |b| b.1) >= cfg.patience {
            break;
        }
    }
    let (best_validation, best_epoch) = match best {
        Some((val, epoch, snap)) => {
            model.store = snap.store;
            model.restore_running_stats(&snap.running);
            (val, epoch)
        }
        None => (f64::NAN, 0),
    };
    let (probs, labels) = predict_units(ds, &model, &split.test)?;
    let test_auroc = auroc(&probs, &labels)?;
    Ok((
        model,
        JobOutcome {
            test_auroc,
            best_validation,
            best_epoch,
            epochs_ran,
        },
    ))
}

fn run_epoch(
    ds: &Dataset,
    model: &mut GnnModel,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    train: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    match ds.task() {
        TaskKind::NodeClassificationTransductive => {
            let g = &ds.graphs()[0];
            let labels = g.node_labels().expect("validated dataset");
            let y: Vec<usize> = train.iter().map(|&v| labels[v]).collect();
            let batch = model.batch(&[g])?;
            step(model, adam, &batch, train, &y, rng.gen())
        }
        task => {
            let mut order = train.to_vec();
            order.shuffle(rng);
            for chunk in order.chunks(cfg.batch_size.max(1)) {
                let graphs: Vec<&Graph> = chunk.iter().map(|&i| &ds.graphs()[i]).collect();
                if graphs.iter().all(|g| g.n() == 0) {
                    continue;
                }
                let batch = model.batch(&graphs)?;
                let (rows, y): (Vec<usize>, Vec<usize>) = match task {
                    TaskKind::GraphClassification => (
                        (0..graphs.len()).collect::<Vec<_>>(),
                        graphs
                            .iter()
                            .map(|g| g.graph_label().expect("validated dataset"))
                            .collect(),
                    ),
                    _ => (
                        (0..batch.num_nodes()).collect(),
                        graphs
                            .iter()
                            .flat_map(|g| g.node_labels().expect("validated dataset").iter().copied())
                            .collect(),
                    ),
                };
                step(model, adam, &batch, &rows, &y, rng.gen())?;
            }
            Ok(())
        }
    }
}

fn step(
    model: &mut GnnModel,
    adam: &mut AdamState,
    batch: &crate::models::Batch,
    rows: &[usize],
    labels: &[usize],
    dropout_seed: u64,
) -> Result<()> {
    if rows.is_empty() {
        return Ok(());
    }
    let mut fwd = model.forward(batch, Mode::Train, dropout_seed)?;
    let loss = fwd.tape.cross_entropy(fwd.logits, rows, labels)?;
    fwd.tape.backward(loss, &mut model.store)?;
    adam.step(&mut model.store);
    model.update_running_stats(&fwd.bn_stats);
    Ok(())
}

/// Validation AUROC, or negative cross-entropy when the validation set does
/// not contain enough classes for AUROC.
pub fn validation_score(ds: &Dataset, model: &GnnModel, units: &[usize]) -> Result<f64> {
    if units.is_empty() {
        return Ok(0.0);
    }
    let (probs, labels) = predict_units(ds, model, units)?;
    match auroc(&probs, &labels) {
        Ok(v) => Ok(v),
        Err(Error::Eval(_)) => {
            let nll: f64 = labels
                .iter()
                .enumerate()
                .map(|(r, &y)| -probs.get(r, y).max(1e-300).ln())
                .sum();
            Ok(-nll / labels.len() as f64)
        }
        Err(e) => Err(e),
    }
}

/// Eval-mode class probabilities and true labels for the given units.
pub fn predict_units(ds: &Dataset, model: &GnnModel, units: &[usize]) -> Result<(Tensor, Vec<usize>)> {
    match ds.task() {
        TaskKind::NodeClassificationTransductive => {
            let g = &ds.graphs()[0];
            let probs = model.predict_proba(&model.batch(&[g])?)?;
            let labels = g.node_labels().expect("validated dataset");
            Ok((probs.gather_rows(units), units.iter().map(|&v| labels[v]).collect()))
        }
        task => {
            let mut parts = Vec::new();
            let mut labels = Vec::new();
            for chunk in units.chunks(EVAL_CHUNK) {
                let graphs: Vec<&Graph> = chunk.iter().map(|&i| &ds.graphs()[i]).collect();
                let probs = model.predict_proba(&model.batch(&graphs)?)?;
                parts.push(probs);
                for g in &graphs {
                    match task {
                        TaskKind::GraphClassification => labels.push(g.graph_label().expect("validated")),
                        _ => labels.extend_from_slice(g.node_labels().expect("validated")),
                    }
                }
            }
            Ok((Tensor::vstack(parts.iter(), ds.num_classes())?, labels))
        }
    }
}
