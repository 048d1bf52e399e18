//! GCN, GAT, GIN and ChebNet convolutions inside one fixed network layout:
//! optional 2-layer node-embedding MLP, five residual conv blocks
//! (conv → batch norm → ReLU → + skip), mean pooling for graph tasks, and a
//! 2-layer MLP head.

mod propagation;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use propagation::{gcn_propagation, Batch};

use crate::error::{Error, Result};
use crate::graph::{Graph, TaskKind};
use crate::nn::{BatchNorm, BatchStats, Mode, ParamId, ParamStore, Tape, Tensor, Var};

pub const GAT_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ModelKind {
    Gcn,
    Gat,
    Gin,
    ChebNet,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Gcn, ModelKind::Gat, ModelKind::Gin, ModelKind::ChebNet];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gat => "gat",
            ModelKind::Gin => "gin",
            ModelKind::ChebNet => "cheb",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "gat" => Ok(ModelKind::Gat),
            "gin" => Ok(ModelKind::Gin),
            "cheb" | "chebnet" => Ok(ModelKind::ChebNet),
            other => Err(Error::input(format!("unknown model `{other}`"))),
        }
    }
}

impl TryFrom<String> for ModelKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelKind> for String {
    fn from(k: ModelKind) -> String {
        k.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub hidden_dim: usize,
    pub num_conv_layers: usize,
    pub gat_heads: usize,
    pub cheb_order: usize,
    pub gin_eps: f64,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            kind: ModelKind::Gcn,
            hidden_dim: 64,
            num_conv_layers: 5,
            gat_heads: 4,
            cheb_order: 3,
            gin_eps: 0.0,
            dropout: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn new(kind: ModelKind) -> Self {
        ModelConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.num_conv_layers == 0 {
            return Err(Error::input("hidden_dim and num_conv_layers must be positive"));
        }
        if self.kind == ModelKind::Gat && (self.gat_heads == 0 || !self.hidden_dim.is_multiple_of(self.gat_heads)) {
            return Err(Error::input("hidden_dim must be divisible by gat_heads"));
        }
        if self.kind == ModelKind::ChebNet && self.cheb_order == 0 {
            return Err(Error::input("cheb_order must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::input("dropout must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    fn new(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng),
            b: Some(store.add(format!("{name}.b"), Tensor::zeros(1, fan_out))),
        }
    }

    /// For layers feeding batch norm, which cancels any per-channel shift.
    fn without_bias(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Self {
        Linear {
            w: store.add_glorot(format!("{name}.w"), fan_in, fan_out, rng),
            b: None,
        }
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let w = tape.param(store, self.w);
        let h = tape.matmul(x, w)?;
        match self.b {
            Some(b) => {
                let b = tape.param(store, b);
                tape.add_row(h, b)
            }
            None => Ok(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct GatHead {
    w: ParamId,
    a_src: ParamId,
    a_dst: ParamId,
}

#[derive(Debug, Clone, PartialEq)]
enum Conv {
    Gcn(Linear),
    Gin(Linear, Linear),
    Gat { heads: Vec<GatHead> },
    Cheb { weights: Vec<ParamId> },
}

impl Conv {
    fn new(cfg: &ModelConfig, store: &mut ParamStore, name: &str, fan_in: usize, rng: &mut impl Rng) -> Self {
        let h = cfg.hidden_dim;
        match cfg.kind {
            ModelKind::Gcn => Conv::Gcn(Linear::without_bias(store, name, fan_in, h, rng)),
            ModelKind::Gin => Conv::Gin(
                Linear::new(store, &format!("{name}.mlp0"), fan_in, h, rng),
                Linear::without_bias(store, &format!("{name}.mlp1"), h, h, rng),
            ),
            ModelKind::Gat => {
                let per_head = h / cfg.gat_heads;
                let heads = (0..cfg.gat_heads)
                    .map(|i| GatHead {
                        w: store.add_glorot(format!("{name}.head{i}.w"), fan_in, per_head, rng),
                        a_src: store.add_glorot(format!("{name}.head{i}.a_src"), per_head, 1, rng),
                        a_dst: store.add_glorot(format!("{name}.head{i}.a_dst"), per_head, 1, rng),
                    })
                    .collect();
                Conv::Gat { heads }
            }
            ModelKind::ChebNet => Conv::Cheb {
                weights: (0..cfg.cheb_order)
                    .map(|j| store.add_glorot(format!("{name}.w{j}"), fan_in, h, rng))
                    .collect(),
            },
        }
    }

    fn forward(&self, tape: &mut Tape, store: &ParamStore, batch: &Batch, x: Var) -> Result<Var> {
        let op = batch.op.clone();
        match self {
            Conv::Gcn(lin) => {
                let w = tape.param(store, lin.w);
                let xw = tape.matmul(x, w)?;
                tape.spmm(op, xw)
            }
            Conv::Gin(l0, l1) => {
                let agg = tape.spmm(op, x)?;
                let h = l0.forward(tape, store, agg)?;
                let h = tape.relu(h)?;
                l1.forward(tape, store, h)
            }
            Conv::Gat { heads } => {
                let mut outs = Vec::with_capacity(heads.len());
                for head in heads {
                    let w = tape.param(store, head.w);
                    let z = tape.matmul(x, w)?;
                    let a_src = tape.param(store, head.a_src);
                    let a_dst = tape.param(store, head.a_dst);
                    let s = tape.matmul(z, a_src)?;
                    let t = tape.matmul(z, a_dst)?;
                    let e = tape.edge_scores(op.clone(), s, t)?;
                    let e = tape.leaky_relu(e, GAT_SLOPE)?;
                    let alpha = tape.edge_softmax(op.clone(), e)?;
                    outs.push(tape.spmm_weighted(op.clone(), alpha, z)?);
                }
                tape.concat_cols(&outs)
            }
            Conv::Cheb { weights } => {
                // T_0 x = x, T_1 x = L̃ x, T_j x = 2 L̃ T_{j-1} x - T_{j-2} x.
                let mut terms = vec![x];
                if weights.len() > 1 {
                    terms.push(tape.spmm(op.clone(), x)?);
                }
                while terms.len() < weights.len() {
                    let (prev, prev2) = (terms[terms.len() - 1], terms[terms.len() - 2]);
                    let lx = tape.spmm(op.clone(), prev)?;
                    terms.push(tape.lincomb(lx, 2.0, prev2, -1.0)?);
                }
                let mut acc: Option<Var> = None;
                for (&t, &wid) in terms.iter().zip(weights) {
                    let w = tape.param(store, wid);
                    let tw = tape.matmul(t, w)?;
                    acc = Some(match acc {
                        None => tw,
                        Some(a) => tape.add(a, tw)?,
                    });
                }
                Ok(acc.expect("cheb_order >= 1"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Block {
    conv: Conv,
    bn: BatchNorm,
    /// Width-matching projection on the skip path.
    skip: Option<ParamId>,
}

/// Logits plus the tape that produced them.
pub struct Forward {
    pub tape: Tape,
    pub logits: Var,
    pub bn_stats: Vec<BatchStats>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GnnModel {
    pub config: ModelConfig,
    pub input_dim: usize,
    pub num_classes: usize,
    pub task: TaskKind,
    pub store: ParamStore,
    embed: Option<(Linear, Linear)>,
    blocks: Vec<Block>,
    head: (Linear, Linear),
}

/// Builds the network with parameters drawn from `seed`.
pub fn assemble(
    config: &ModelConfig,
    input_dim: usize,
    num_classes: usize,
    task: TaskKind,
    seed: u64,
) -> Result<GnnModel> {
    config.validate()?;
    if input_dim == 0 {
        return Err(Error::input("input_dim must be at least 1"));
    }
    if num_classes == 0 {
        return Err(Error::input("num_classes must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let h = config.hidden_dim;
    let embed = task.is_node_level().then(|| {
        (
            Linear::new(&mut store, "embed0", input_dim, h, &mut rng),
            Linear::new(&mut store, "embed1", h, h, &mut rng),
        )
    });
    let mut width = if embed.is_some() { h } else { input_dim };
    let mut blocks = Vec::with_capacity(config.num_conv_layers);
    for i in 0..config.num_conv_layers {
        let name = format!("conv{i}");
        let conv = Conv::new(config, &mut store, &name, width, &mut rng);
        let bn = BatchNorm::new(&mut store, &format!("{name}.bn"), h);
        let skip = (width != h).then(|| store.add_glorot(format!("{name}.skip"), width, h, &mut rng));
        blocks.push(Block { conv, bn, skip });
        width = h;
    }
    let head = (
        Linear::new(&mut store, "head0", h, h, &mut rng),
        Linear::new(&mut store, "head1", h, num_classes, &mut rng),
    );
    Ok(GnnModel {
        config: *config,
        input_dim,
        num_classes,
        task,
        store,
        embed,
        blocks,
        head,
    })
}

impl GnnModel {
    pub fn num_parameters(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn batch(&self, graphs: &[&Graph]) -> Result<Batch> {
        Batch::new(graphs, self.config.kind, self.config.gin_eps)
    }

    /// Runs the network on a batch. Graph tasks yield one logit row per
    /// graph, node tasks one per node. `dropout_seed` only matters in train
    /// mode with non-zero dropout.
    pub fn forward(&self, batch: &Batch, mode: Mode, dropout_seed: u64) -> Result<Forward> {
        self.forward_with(&self.store, batch, mode, dropout_seed)
    }

    /// Forward pass with externally supplied parameters (same layout as
    /// `self.store`); used for gradient checking.
    pub fn forward_with(
        &self,
        store: &ParamStore,
        batch: &Batch,
        mode: Mode,
        dropout_seed: u64,
    ) -> Result<Forward> {
        if batch.features.cols() != self.input_dim {
            return Err(Error::input(format!(
                "batch feature width {} differs from model input {}",
                batch.features.cols(),
                self.input_dim
            )));
        }
        let mut tape = Tape::new();
        let mut bn_stats = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let mut x = tape.input(batch.features.clone())?;
        if let Some((l0, l1)) = &self.embed {
            x = (|| {
                let h = l0.forward(&mut tape, store, x)?;
                let h = tape.relu(h)?;
                l1.forward(&mut tape, store, h)
            })()
            .map_err(|e| in_layer(e, "embedding MLP"))?;
        }
        for (i, block) in self.blocks.iter().enumerate() {
            let mut step = || -> Result<Var> {
                let h = block.conv.forward(&mut tape, store, batch, x)?;
                let (h, stats) = block.bn.forward(&mut tape, store, h, mode)?;
                bn_stats.extend(stats);
                let h = tape.relu(h)?;
                let skip = match block.skip {
                    Some(p) => {
                        let w = tape.param(store, p);
                        tape.matmul(x, w)?
                    }
                    None => x,
                };
                let mut out = tape.add(h, skip)?;
                if mode == Mode::Train && self.config.dropout > 0.0 {
                    out = dropout(&mut tape, out, self.config.dropout, &mut rng)?;
                }
                Ok(out)
            };
            x = step().map_err(|e| in_layer(e, &format!("conv layer {i}")))?;
        }
        if self.task == TaskKind::GraphClassification {
            x = tape.segment_mean(x, batch.segments.clone(), batch.num_graphs)?;
        }
        let logits = (|| {
            let h = self.head.0.forward(&mut tape, store, x)?;
            let h = tape.relu(h)?;
            self.head.1.forward(&mut tape, store, h)
        })()
        .map_err(|e| in_layer(e, "classifier head"))?;
        Ok(Forward {
            tape,
            logits,
            bn_stats,
        })
    }

    /// Commits the batch statistics of a train-mode forward pass.
    pub fn update_running_stats(&mut self, stats: &[BatchStats]) {
        for (block, s) in self.blocks.iter_mut().zip(stats) {
            block.bn.update(s);
        }
    }

    /// Running statistics of every batch-norm site, for checkpointing.
    pub fn running_stats(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.blocks
            .iter()
            .map(|b| (b.bn.running_mean.clone(), b.bn.running_var.clone()))
            .collect()
    }

    pub fn restore_running_stats(&mut self, stats: &[(Vec<f64>, Vec<f64>)]) {
        for (block, (m, v)) in self.blocks.iter_mut().zip(stats) {
            block.bn.running_mean.clone_from(m);
            block.bn.running_var.clone_from(v);
        }
    }

    /// Class probabilities (row softmax of the eval-mode logits).
    pub fn predict_proba(&self, batch: &Batch) -> Result<Tensor> {
        let mut fwd = self.forward(batch, Mode::Eval, 0)?;
        let p = fwd.tape.row_softmax(fwd.logits)?;
        Ok(fwd.tape.value(p).clone())
    }
}

fn in_layer(e: Error, layer: &str) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("{layer}: {msg}")),
        other => other,
    }
}

fn dropout(tape: &mut Tape, x: Var, p: f64, rng: &mut impl Rng) -> Result<Var> {
    let (r, c) = tape.value(x).shape();
    let keep = 1.0 / (1.0 - p);
    let mask = (0..r * c)
        .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
        .collect();
    let m = tape.input(Tensor::from_vec(r, c, mask)?)?;
    tape.mul(x, m)
}
