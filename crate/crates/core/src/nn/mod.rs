//! Minimal dense numeric core: tensors, a reverse-mode tape, batch norm,
//! Adam, and a finite-difference gradient checker.

mod params;
mod tape;
mod tensor;

pub use params::{ParamId, ParamStore};
pub use tape::{BatchStats, Tape, Var};
pub use tensor::{Csr, Tensor};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Learned scale/shift plus running statistics for one batch-norm site.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(store: &mut ParamStore, name: &str, width: usize) -> Self {
        BatchNorm {
            gamma: store.add(format!("{name}.gamma"), Tensor::ones(1, width)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(1, width)),
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    /// Train mode normalizes with batch statistics and returns them so the
    /// caller can commit them with [`BatchNorm::update`]; eval mode uses the
    /// running statistics.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        mode: Mode,
    ) -> Result<(Var, Option<BatchStats>)> {
        let gamma = tape.param(store, self.gamma);
        let beta = tape.param(store, self.beta);
        match mode {
            Mode::Train => {
                let (y, stats) = tape.batchnorm_train(x, gamma, beta, self.eps)?;
                Ok((y, Some(stats)))
            }
            Mode::Eval => Ok((
                tape.batchnorm_eval(x, gamma, beta, &self.running_mean, &self.running_var, self.eps)?,
                None,
            )),
        }
    }

    pub fn update(&mut self, stats: &BatchStats) {
        // Running variance tracks the unbiased estimate.
        let correction = if stats.count > 1 {
            stats.count as f64 / (stats.count - 1) as f64
        } else {
            1.0
        };
        let m = self.momentum;
        for (r, &b) in self.running_mean.iter_mut().zip(&stats.mean) {
            *r = (1.0 - m) * *r + m * b;
        }
        for (r, &b) in self.running_var.iter_mut().zip(&stats.var) {
            *r = (1.0 - m) * *r + m * b * correction;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
    step: u64,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || {
            store
                .ids()
                .map(|id| {
                    let (r, c) = store.value(id).shape();
                    Tensor::zeros(r, c)
                })
                .collect::<Vec<_>>()
        };
        AdamState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update; gradients are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let ids: Vec<ParamId> = store.ids().collect();
        for id in ids {
            let (value, grad) = store.value_and_grad_mut(id);
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            for (((p, &g), mi), vi) in value
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        store.zero_grad();
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Coordinates sampled per parameter tensor (all when the tensor is smaller).
    pub samples_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            h: 1e-5,
            samples_per_param: 12,
            seed: 0,
        }
    }
}

/// Largest relative error between the tape gradient and a central finite
/// difference, over sampled parameter coordinates.
///
/// `f` must rebuild the scalar loss from scratch for the given parameters.
pub fn grad_check<F>(f: F, store: &mut ParamStore, cfg: GradCheckConfig) -> Result<f64>
where
    F: Fn(&ParamStore) -> Result<(Tape, Var)>,
{
    store.zero_grad();
    let (tape, out) = f(store)?;
    tape.backward(out, store)?;
    let analytic: Vec<Tensor> = store.ids().map(|id| store.grad(id).clone()).collect();
    store.zero_grad();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eval = |s: &ParamStore| -> Result<f64> {
        let (t, o) = f(s)?;
        Ok(t.value(o).data()[0])
    };
    let mut worst: f64 = 0.0;
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let len = store.value(id).len();
        let scale = analytic[id.index()].data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut coords: Vec<usize> = (0..len).collect();
        coords.shuffle(&mut rng);
        coords.truncate(cfg.samples_per_param);
        for k in coords {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + cfg.h;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig - cfg.h;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.h);
            let a = analytic[id.index()].data()[k];
            let denom = scale.max(numeric.abs()).max(1e-6);
            worst = worst.max((a - numeric).abs() / denom);
        }
    }
    Ok(worst)
}
