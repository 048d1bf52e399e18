//! Reverse-mode differentiation over a linear tape of dense ops.
//!
//! Every op records its inputs and (where backward needs it) cached
//! intermediates. [`Tape::backward`] walks the tape once in reverse and
//! accumulates parameter gradients into the [`ParamStore`].

use std::sync::Arc;

use super::tensor::{gemm, Csr};
use super::{ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    LinComb(Var, f64, Var, f64),
    Relu(Var),
    LeakyRelu(Var, f64),
    RowSoftmax(Var),
    SegmentMean {
        x: Var,
        seg: Arc<Vec<usize>>,
        counts: Vec<usize>,
    },
    Spmm {
        op: Arc<Csr>,
        x: Var,
    },
    EdgeScores {
        op: Arc<Csr>,
        src: Var,
        dst: Var,
    },
    EdgeSoftmax {
        op: Arc<Csr>,
        e: Var,
    },
    SpmmWeighted {
        op: Arc<Csr>,
        w: Var,
        x: Var,
    },
    ConcatCols(Vec<Var>),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    Sum(Var),
    CrossEntropy {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Batch statistics observed by a training-mode batch norm.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub count: usize,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::input(format!("{op}: incompatible shapes {a:?} and {b:?}"))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, name: &str, value: Tensor, op: Op, needs_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("non-finite output from {name}")));
        }
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, t: Tensor) -> Result<Var> {
        self.push("input", t, Op::Input, false)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.nodes.push(Node {
            value: store.value(id).clone(),
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self
            .value(a)
            .matmul(self.value(b))
            .map_err(|_| shape_err("matmul", self.value(a).shape(), self.value(b).shape()))?;
        let ng = self.needs(a) || self.needs(b);
        self.push("matmul", out, Op::MatMul(a, b), ng)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.lincomb(a, 1.0, b, 1.0)
    }

    /// `alpha * a + beta * b`.
    pub fn lincomb(&mut self, a: Var, alpha: f64, b: Var, beta: f64) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("add", ta.shape(), tb.shape()));
        }
        let mut out = ta.map(|x| alpha * x);
        out.axpy(beta, tb);
        let ng = self.needs(a) || self.needs(b);
        self.push("add", out, Op::LinComb(a, alpha, b, beta), ng)
    }

    /// Adds a `1 x cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(shape_err("add_row", tx.shape(), tb.shape()));
        }
        let mut out = tx.clone();
        let c = tx.cols();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                for (o, &b) in row.iter_mut().zip(tb.data()) {
                    *o += b;
                }
            }
        }
        let ng = self.needs(x) || self.needs(bias);
        self.push("add_row", out, Op::AddRow(x, bias), ng)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err("mul", ta.shape(), tb.shape()));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(ta.rows(), ta.cols(), data)?;
        let ng = self.needs(a) || self.needs(b);
        self.push("mul", out, Op::Mul(a, b), ng)
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        let ng = self.needs(x);
        self.push("relu", out, Op::Relu(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let ng = self.needs(x);
        self.push("leaky_relu", out, Op::LeakyRelu(x, slope), ng)
    }

    pub fn row_softmax(&mut self, x: Var) -> Result<Var> {
        let mut out = self.value(x).clone();
        let c = out.cols();
        if c > 0 {
            for row in out.data_mut().chunks_mut(c) {
                softmax_in_place(row);
            }
        }
        let ng = self.needs(x);
        self.push("row_softmax", out, Op::RowSoftmax(x), ng)
    }

    /// Per-segment row mean. `seg[i]` is the segment of row `i`; empty
    /// segments produce zero rows.
    pub fn segment_mean(&mut self, x: Var, seg: Arc<Vec<usize>>, num_segments: usize) -> Result<Var> {
        let tx = self.value(x);
        if seg.len() != tx.rows() {
            return Err(Error::input("segment ids must cover every row"));
        }
        let d = tx.cols();
        let mut counts = vec![0usize; num_segments];
        let mut out = Tensor::zeros(num_segments, d);
        for (i, &s) in seg.iter().enumerate() {
            if s >= num_segments {
                return Err(Error::input(format!("segment id {s} out of range")));
            }
            counts[s] += 1;
            for (o, &v) in out.row_mut(s).iter_mut().zip(tx.row(i)) {
                *o += v;
            }
        }
        for (s, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                let inv = 1.0 / cnt as f64;
                out.row_mut(s).iter_mut().for_each(|o| *o *= inv);
            }
        }
        let ng = self.needs(x);
        self.push("segment_mean", out, Op::SegmentMean { x, seg, counts }, ng)
    }

    /// Fixed sparse operator applied to `x`.
    pub fn spmm(&mut self, op: Arc<Csr>, x: Var) -> Result<Var> {
        let tx = self.value(x);
        if op.cols != tx.rows() {
            return Err(shape_err("spmm", (op.rows, op.cols), tx.shape()));
        }
        let out = op.spmm(None, tx);
        let ng = self.needs(x);
        self.push("spmm", out, Op::Spmm { op, x }, ng)
    }

    /// For each stored entry `(r, c)` of `op`: `src[r] + dst[c]`, as an `nnz x 1` column.
    pub fn edge_scores(&mut self, op: Arc<Csr>, src: Var, dst: Var) -> Result<Var> {
        let (ts, td) = (self.value(src), self.value(dst));
        if ts.shape() != (op.rows, 1) || td.shape() != (op.cols, 1) {
            return Err(shape_err("edge_scores", ts.shape(), td.shape()));
        }
        let mut data = Vec::with_capacity(op.nnz());
        for r in 0..op.rows {
            for k in op.indptr[r]..op.indptr[r + 1] {
                data.push(ts.data()[r] + td.data()[op.indices[k]]);
            }
        }
        let out = Tensor::from_vec(op.nnz(), 1, data)?;
        let ng = self.needs(src) || self.needs(dst);
        self.push("edge_scores", out, Op::EdgeScores { op, src, dst }, ng)
    }

    /// Softmax of edge values within each row of `op`.
    pub fn edge_softmax(&mut self, op: Arc<Csr>, e: Var) -> Result<Var> {
        let te = self.value(e);
        if te.shape() != (op.nnz(), 1) {
            return Err(shape_err("edge_softmax", te.shape(), (op.nnz(), 1)));
        }
        let mut out = te.clone();
        for r in 0..op.rows {
            softmax_in_place(&mut out.data_mut()[op.indptr[r]..op.indptr[r + 1]]);
        }
        let ng = self.needs(e);
        self.push("edge_softmax", out, Op::EdgeSoftmax { op, e }, ng)
    }

    /// Sparse product with learned per-entry weights `w` (`nnz x 1`).
    pub fn spmm_weighted(&mut self, op: Arc<Csr>, w: Var, x: Var) -> Result<Var> {
        let (tw, tx) = (self.value(w), self.value(x));
        if tw.shape() != (op.nnz(), 1) || op.cols != tx.rows() {
            return Err(shape_err("spmm_weighted", tw.shape(), tx.shape()));
        }
        let out = op.spmm(Some(tw.data()), tx);
        let ng = self.needs(w) || self.needs(x);
        self.push("spmm_weighted", out, Op::SpmmWeighted { op, w, x }, ng)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = parts
            .first()
            .map(|&p| self.value(p).rows())
            .ok_or_else(|| Error::input("concat of nothing"))?;
        if parts.iter().any(|&p| self.value(p).rows() != rows) {
            return Err(Error::input("concat_cols: row counts differ"));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let ng = parts.iter().any(|&p| self.needs(p));
        self.push("concat_cols", out, Op::ConcatCols(parts.to_vec()), ng)
    }

    /// Column-wise batch normalization using the statistics of `x` itself.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: f64,
    ) -> Result<(Var, BatchStats)> {
        let tx = self.value(x);
        let (n, c) = tx.shape();
        if n == 0 {
            return Err(Error::input("batch norm in train mode needs at least one row"));
        }
        let mut mean = vec![0.0; c];
        for r in 0..n {
            for (m, &v) in mean.iter_mut().zip(tx.row(r)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; c];
        for r in 0..n {
            for ((s, &v), &m) in var.iter_mut().zip(tx.row(r)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n as f64);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        let stats = BatchStats {
            mean: mean.clone(),
            var,
            count: n,
        };
        let v = self.affine_norm(x, gamma, beta, &mean, inv_std, true)?;
        Ok((v, stats))
    }

    /// Batch normalization with fixed (running) statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        var: &[f64],
        eps: f64,
    ) -> Result<Var> {
        let inv_std = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
        self.affine_norm(x, gamma, beta, mean, inv_std, false)
    }

    fn affine_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mean: &[f64],
        inv_std: Vec<f64>,
        batch_stats: bool,
    ) -> Result<Var> {
        let (tx, tg, tb) = (self.value(x), self.value(gamma), self.value(beta));
        let c = tx.cols();
        if tg.shape() != (1, c) || tb.shape() != (1, c) || mean.len() != c {
            return Err(shape_err("batchnorm", tx.shape(), tg.shape()));
        }
        let mut xhat = tx.clone();
        let mut out = tx.clone();
        for r in 0..tx.rows() {
            let xr = xhat.row_mut(r);
            for j in 0..c {
                xr[j] = (xr[j] - mean[j]) * inv_std[j];
            }
            let or = out.row_mut(r);
            for j in 0..c {
                or[j] = tg.data()[j] * xr[j] + tb.data()[j];
            }
        }
        let ng = self.needs(x) || self.needs(gamma) || self.needs(beta);
        self.push(
            "batchnorm",
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            ng,
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().sum();
        let ng = self.needs(x);
        self.push("sum", Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// Mean softmax cross-entropy over the selected `rows` of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, rows: &[usize], labels: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        let classes = tl.cols();
        if rows.len() != labels.len() || rows.is_empty() {
            return Err(Error::input("cross_entropy needs matching, non-empty rows and labels"));
        }
        let mut probs = Tensor::zeros(rows.len(), classes);
        let mut loss = 0.0;
        for (i, (&r, &y)) in rows.iter().zip(labels).enumerate() {
            if r >= tl.rows() || y >= classes {
                return Err(Error::input(format!("cross_entropy: row {r} / label {y} out of range")));
            }
            let row = tl.row(r);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            for (p, &v) in probs.row_mut(i).iter_mut().zip(row) {
                *p = (v - lse).exp();
            }
        }
        loss /= rows.len() as f64;
        let ng = self.needs(logits);
        self.push(
            "cross_entropy",
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                rows: rows.to_vec(),
                labels: labels.to_vec(),
                probs,
            },
            ng,
        )
    }

    /// Backpropagates from the scalar `out`, accumulating into `store`'s gradients.
    pub fn backward(&self, out: Var, store: &mut ParamStore) -> Result<()> {
        if self.value(out).shape() != (1, 1) {
            return Err(Error::input("backward starts from a scalar"));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out.0] = Some(Tensor::scalar(1.0));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.backward_node(node, g, &mut grads, store);
        }
        if !store.grads_finite() {
            return Err(Error::Numeric("non-finite gradient".into()));
        }
        Ok(())
    }

    fn backward_node(
        &self,
        node: &Node,
        g: Tensor,
        grads: &mut [Option<Tensor>],
        store: &mut ParamStore,
    ) {
        match &node.op {
            Op::Input => {}
            Op::Param(id) => store.grad_mut(*id).axpy(1.0, &g),
            Op::MatMul(a, b) => {
                if self.needs(*a) {
                    let ga = slot(grads, *a, self.value(*a).shape());
                    gemm(&g, false, self.value(*b), true, ga, 1.0);
                }
                if self.needs(*b) {
                    let gb = slot(grads, *b, self.value(*b).shape());
                    gemm(self.value(*a), true, &g, false, gb, 1.0);
                }
            }
            Op::LinComb(a, alpha, b, beta) => {
                self.acc(grads, *a, *alpha, &g);
                self.acc(grads, *b, *beta, &g);
            }
            Op::AddRow(x, bias) => {
                self.acc(grads, *x, 1.0, &g);
                if self.needs(*bias) {
                    let c = g.cols();
                    let gb = slot(grads, *bias, (1, c));
                    for r in 0..g.rows() {
                        for (o, &v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                for (this, other) in [(*a, *b), (*b, *a)] {
                    if self.needs(this) {
                        let ov = self.value(other);
                        let gt = slot(grads, this, ov.shape());
                        for ((o, &gv), &v) in gt.data_mut().iter_mut().zip(g.data()).zip(ov.data()) {
                            *o += gv * v;
                        }
                    }
                }
            }
            Op::Relu(x) => {
                let xin = self.value(*x);
                let local = Tensor::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(xin.data())
                        .map(|(&gv, &v)| if v > 0.0 { gv } else { 0.0 })
                        .collect(),
                )
                .expect("same shape");
                self.acc(grads, *x, 1.0, &local);
            }
            Op::LeakyRelu(x, slope) => {
                let xin = self.value(*x);
                let local = Tensor::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data()
                        .iter()
                        .zip(xin.data())
                        .map(|(&gv, &v)| if v > 0.0 { gv } else { slope * gv })
                        .collect(),
                )
                .expect("same shape");
                self.acc(grads, *x, 1.0, &local);
            }
            Op::RowSoftmax(x) => {
                let y = &node.value;
                let c = y.cols();
                let mut local = Tensor::zeros(y.rows(), c);
                if c > 0 {
                    for r in 0..y.rows() {
                        softmax_backward(y.row(r), g.row(r), local.row_mut(r));
                    }
                }
                self.acc(grads, *x, 1.0, &local);
            }
            Op::SegmentMean { x, seg, counts } => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, self.value(*x).shape());
                    for (i, &s) in seg.iter().enumerate() {
                        let inv = 1.0 / counts[s] as f64;
                        for (o, &v) in gx.row_mut(i).iter_mut().zip(g.row(s)) {
                            *o += v * inv;
                        }
                    }
                }
            }
            Op::Spmm { op, x } => {
                if self.needs(*x) {
                    let gx = slot(grads, *x, self.value(*x).shape());
                    op.spmm_transpose_acc(None, &g, gx);
                }
            }
            Op::EdgeScores { op, src, dst } => {
                let rows = op.row_of_entries();
                if self.needs(*src) {
                    let gs = slot(grads, *src, (op.rows, 1));
                    for (k, &r) in rows.iter().enumerate() {
                        gs.data_mut()[r] += g.data()[k];
                    }
                }
                if self.needs(*dst) {
                    let gd = slot(grads, *dst, (op.cols, 1));
                    for (k, &c) in op.indices.iter().enumerate() {
                        gd.data_mut()[c] += g.data()[k];
                    }
                }
            }
            Op::EdgeSoftmax { op, e } => {
                let y = &node.value;
                let mut local = Tensor::zeros(y.rows(), 1);
                for r in 0..op.rows {
                    let span = op.indptr[r]..op.indptr[r + 1];
                    softmax_backward(
                        &y.data()[span.clone()],
                        &g.data()[span.clone()],
                        &mut local.data_mut()[span],
                    );
                }
                self.acc(grads, *e, 1.0, &local);
            }
            Op::SpmmWeighted { op, w, x } => {
                let (tw, tx) = (self.value(*w), self.value(*x));
                if self.needs(*w) {
                    let d = tx.cols();
                    let gw = slot(grads, *w, tw.shape());
                    for r in 0..op.rows {
                        let grow = g.row(r);
                        for k in op.indptr[r]..op.indptr[r + 1] {
                            let xr = tx.row(op.indices[k]);
                            let mut acc = 0.0;
                            for j in 0..d {
                                acc += grow[j] * xr[j];
                            }
                            gw.data_mut()[k] += acc;
                        }
                    }
                }
                if self.needs(*x) {
                    let tw = tw.data().to_vec();
                    let gx = slot(grads, *x, tx.shape());
                    op.spmm_transpose_acc(Some(&tw), &g, gx);
                }
            }
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (rows, cols) = self.value(p).shape();
                    if self.needs(p) {
                        let gp = slot(grads, p, (rows, cols));
                        for r in 0..rows {
                            for (o, &v) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + cols]) {
                                *o += v;
                            }
                        }
                    }
                    off += cols;
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let (n, c) = xhat.shape();
                let tg = self.value(*gamma).data().to_vec();
                let mut sum_g = vec![0.0; c];
                let mut sum_gx = vec![0.0; c];
                for r in 0..n {
                    for j in 0..c {
                        sum_g[j] += g.row(r)[j];
                        sum_gx[j] += g.row(r)[j] * xhat.row(r)[j];
                    }
                }
                if self.needs(*gamma) {
                    let gg = slot(grads, *gamma, (1, c));
                    for (o, v) in gg.data_mut().iter_mut().zip(&sum_gx) {
                        *o += v;
                    }
                }
                if self.needs(*beta) {
                    let gb = slot(grads, *beta, (1, c));
                    for (o, v) in gb.data_mut().iter_mut().zip(&sum_g) {
                        *o += v;
                    }
                }
                if self.needs(*x) {
                    let gx = slot(grads, *x, (n, c));
                    let nf = n as f64;
                    for r in 0..n {
                        let (grow, xr) = (g.row(r), xhat.row(r));
                        let out = gx.row_mut(r);
                        for j in 0..c {
                            let scale = tg[j] * inv_std[j];
                            out[j] += if *batch_stats {
                                scale * (grow[j] - sum_g[j] / nf - xr[j] * sum_gx[j] / nf)
                            } else {
                                scale * grow[j]
                            };
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                let shape = self.value(*x).shape();
                self.acc(grads, *x, s, &Tensor::ones(shape.0, shape.1));
            }
            Op::CrossEntropy {
                logits,
                rows,
                labels,
                probs,
            } => {
                if self.needs(*logits) {
                    let scale = g.data()[0] / rows.len() as f64;
                    let gl = slot(grads, *logits, self.value(*logits).shape());
                    for (i, (&r, &y)) in rows.iter().zip(labels).enumerate() {
                        let out = gl.row_mut(r);
                        for (j, (o, &p)) in out.iter_mut().zip(probs.row(i)).enumerate() {
                            let t = if j == y { 1.0 } else { 0.0 };
                            *o += scale * (p - t);
                        }
                    }
                }
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Tensor>], v: Var, alpha: f64, g: &Tensor) {
        if self.needs(v) {
            slot(grads, v, g.shape()).axpy(alpha, g);
        }
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, shape: (usize, usize)) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(shape.0, shape.1))
}

fn softmax_in_place(row: &mut [f64]) {
    if row.is_empty() {
        return;
    }
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    row.iter_mut().for_each(|v| *v /= sum);
}

fn softmax_backward(y: &[f64], g: &[f64], out: &mut [f64]) {
    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
    for ((o, &yv), &gv) in out.iter_mut().zip(y).zip(g) {
        *o = yv * (gv - dot);
    }
}
