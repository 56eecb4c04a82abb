//! Minimal reverse-mode differentiation.
//!
//! A [`Graph`] is a tape of nodes built in forward order; every operation
//! computes its value eagerly and records what backward needs. The primitive
//! set is fixed and small so that each primitive carries its own
//! finite-difference test: `matmul`, `add`, `scale`, `concat_cols`,
//! `row_gather`, `scatter_sum`, `silu`, `tanh`, `sigmoid`, `layer_norm`,
//! `mse`, `stop_gradient`, plus the broadcast helpers `row_scale`, `bias_add`
//! and `slice_cols`.
//!
//! `scatter_sum` accumulates each output row in a canonical order (sorted by
//! the bit patterns of the contributing rows), so a permutation of the inputs
//! reproduces bit-identical sums.

mod gradcheck;
mod params;

pub use gradcheck::grad_check;
pub use params::ParamStore;

use std::collections::HashMap;
use std::sync::Arc;

use crate::tensor::Tensor;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Scale(NodeId, f64),
    ConcatCols(Vec<NodeId>),
    RowGather(NodeId, Arc<Vec<usize>>),
    ScatterSum {
        src: NodeId,
        index: Arc<Vec<usize>>,
    },
    Silu(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    LayerNorm(NodeId),
    Mse(NodeId, NodeId),
    StopGradient,
    RowScale(NodeId, NodeId),
    BiasAdd(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    param_slot: Option<usize>,
}

/// Forward tape with eager values.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            param_slot: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
        Error::ShapeMismatch {
            op,
            lhs: format!("{}x{}", a.rows(), a.cols()),
            rhs: format!("{}x{}", b.rows(), b.cols()),
        }
    }

    /// Constant leaf; receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value)
    }

    /// Parameter leaf bound to a [`ParamStore`] entry; its gradient is
    /// reported by [`Graph::backward`].
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        let slot = store.slot_of(name)?;
        let id = self.push(Op::Leaf, store.tensor(slot).clone());
        self.nodes[id.0].param_slot = Some(slot);
        Ok(id)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("add", ta, tb));
        }
        let value = ta.add_scaled(tb, 1.0)?;
        Ok(self.push(Op::Add(a, b), value))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.value(a).scale(c);
        self.push(Op::Scale(a, c), value)
    }

    /// `a - b` as a composite of `add` and `scale`.
    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let neg = self.scale(b, -1.0);
        self.add(a, neg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                return Err(Self::shape_err("concat_cols", self.value(parts[0]), self.value(p)));
            }
            cols += self.value(p).cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        let mut at = 0;
        for &p in parts {
            let t = &self.nodes[p.0].value;
            for r in 0..rows {
                out.row_mut(r)[at..at + t.cols()].copy_from_slice(t.row(r));
            }
            at += t.cols();
        }
        Ok(self.push(Op::ConcatCols(parts.to_vec()), out))
    }

    pub fn row_gather(&mut self, a: NodeId, index: Arc<Vec<usize>>) -> Result<NodeId> {
        let ta = self.value(a);
        let mut out = Tensor::zeros(index.len(), ta.cols());
        for (r, &src) in index.iter().enumerate() {
            if src >= ta.rows() {
                return Err(Error::InvalidConfig(format!(
                    "row_gather index {src} out of range for {} rows",
                    ta.rows()
                )));
            }
            out.row_mut(r).copy_from_slice(ta.row(src));
        }
        Ok(self.push(Op::RowGather(a, index), out))
    }

    /// Sum rows of `a` into `out_rows` buckets chosen by `index`. Bucket
    /// accumulation order is canonical (sorted by row bit patterns), so the
    /// result is independent of input row order.
    pub fn scatter_sum(
        &mut self,
        a: NodeId,
        index: Arc<Vec<usize>>,
        out_rows: usize,
    ) -> Result<NodeId> {
        let ta = self.value(a);
        if index.len() != ta.rows() {
            return Err(Error::ShapeMismatch {
                op: "scatter_sum",
                lhs: format!("{} rows", ta.rows()),
                rhs: format!("{} indices", index.len()),
            });
        }
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); out_rows];
        for (r, &t) in index.iter().enumerate() {
            if t >= out_rows {
                return Err(Error::InvalidConfig(format!(
                    "scatter_sum index {t} out of range for {out_rows} rows"
                )));
            }
            buckets[t].push(r);
        }
        let mut out = Tensor::zeros(out_rows, ta.cols());
        for (t, bucket) in buckets.iter_mut().enumerate() {
            bucket.sort_by(|&x, &y| cmp_rows(ta.row(x), ta.row(y)));
            for &r in bucket.iter() {
                let src = ta.row(r).to_vec();
                for (o, s) in out.row_mut(t).iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        Ok(self.push(Op::ScatterSum { src: a, index }, out))
    }

    pub fn silu(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(|x| x * sigmoid(x));
        self.push(Op::Silu(a), value)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), value)
    }

    /// Row-wise normalization over the last dimension, epsilon 1e-5, no
    /// learned affine terms.
    pub fn layer_norm(&mut self, a: NodeId) -> NodeId {
        let ta = self.value(a);
        let mut out = Tensor::zeros(ta.rows(), ta.cols());
        for r in 0..ta.rows() {
            let row = ta.row(r);
            let (mean, inv_std) = row_norm_stats(row);
            for (o, &x) in out.row_mut(r).iter_mut().zip(row) {
                *o = (x - mean) * inv_std;
            }
        }
        self.push(Op::LayerNorm(a), out)
    }

    /// Mean squared difference over all entries (scalar).
    pub fn mse(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Self::shape_err("mse", ta, tb));
        }
        let n = ta.len().max(1) as f64;
        let v = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n;
        Ok(self.push(Op::Mse(a, b), Tensor::scalar(v)))
    }

    /// Pass the value through and block gradient flow.
    pub fn stop_gradient(&mut self, a: NodeId) -> NodeId {
        let value = self.value(a).clone();
        self.push(Op::StopGradient, value)
    }

    /// Multiply every row of `a` by the matching entry of column vector `s`.
    pub fn row_scale(&mut self, a: NodeId, s: NodeId) -> Result<NodeId> {
        let (ta, ts) = (self.value(a), self.value(s));
        if ts.cols() != 1 || ts.rows() != ta.rows() {
            return Err(Self::shape_err("row_scale", ta, ts));
        }
        let mut out = ta.clone();
        for r in 0..out.rows() {
            let f = ts.get(r, 0);
            for v in out.row_mut(r) {
                *v *= f;
            }
        }
        Ok(self.push(Op::RowScale(a, s), out))
    }

    /// Add bias row `b` (`1 x cols`) to every row of `a`.
    pub fn bias_add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(Self::shape_err("bias_add", ta, tb));
        }
        let mut out = ta.clone();
        let bias = tb.row(0).to_vec();
        for r in 0..out.rows() {
            for (v, b) in out.row_mut(r).iter_mut().zip(&bias) {
                *v += b;
            }
        }
        Ok(self.push(Op::BiasAdd(a, b), out))
    }

    /// Columns `c0..c1` of `a`.
    pub fn slice_cols(&mut self, a: NodeId, c0: usize, c1: usize) -> Result<NodeId> {
        let ta = self.value(a);
        if c0 >= c1 || c1 > ta.cols() {
            return Err(Error::InvalidConfig(format!(
                "slice_cols {c0}..{c1} out of range for {} cols",
                ta.cols()
            )));
        }
        let mut out = Tensor::zeros(ta.rows(), c1 - c0);
        for r in 0..ta.rows() {
            out.row_mut(r).copy_from_slice(&ta.row(r)[c0..c1]);
        }
        Ok(self.push(Op::SliceCols(a, c0, c1), out))
    }

    /// Broadcast a `1 x m` row to `n` rows (a `matmul` with a constant ones
    /// column, so the gradient is the column sum).
    pub fn repeat_row(&mut self, row: NodeId, n: usize) -> Result<NodeId> {
        let ones = self.constant(Tensor::column(n, 1.0));
        self.matmul(ones, row)
    }

    /// `x · w + b` with `b` broadcast over rows.
    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let xw = self.matmul(x, w)?;
        self.bias_add(xw, b)
    }

    /// Reverse pass from a scalar loss node. Returns parameter gradients keyed
    /// by store slot; parameters the loss does not reach are absent.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.shape() != (1, 1) {
            return Err(Error::ShapeMismatch {
                op: "backward",
                lhs: format!("{}x{}", lt.rows(), lt.cols()),
                rhs: "1x1 scalar loss".to_string(),
            });
        }
        if !lt.is_finite() {
            return Err(Error::NonFinite {
                context: "loss".to_string(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::scalar(1.0));
        let mut by_slot: HashMap<usize, Tensor> = HashMap::new();

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if let Some(slot) = node.param_slot {
                match by_slot.get_mut(&slot) {
                    Some(acc) => *acc = acc.add_scaled(&g, 1.0)?,
                    None => {
                        by_slot.insert(slot, g.clone());
                    }
                }
            }
            match &node.op {
                Op::Leaf | Op::StopGradient => {}
                Op::MatMul(a, b) => {
                    let da = g.matmul(&self.value(*b).transpose())?;
                    let db = self.value(*a).transpose().matmul(&g)?;
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone())?;
                    accumulate(&mut grads, *b, g)?;
                }
                Op::Scale(a, c) => {
                    accumulate(&mut grads, *a, g.scale(*c))?;
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut dp = Tensor::zeros(g.rows(), w);
                        for r in 0..g.rows() {
                            dp.row_mut(r).copy_from_slice(&g.row(r)[at..at + w]);
                        }
                        at += w;
                        accumulate(&mut grads, p, dp)?;
                    }
                }
                Op::RowGather(a, index) => {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for (r, &src) in index.iter().enumerate() {
                        let grow = g.row(r).to_vec();
                        for (o, v) in da.row_mut(src).iter_mut().zip(grow) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::ScatterSum { src, index } => {
                    let ts = self.value(*src);
                    let mut ds = Tensor::zeros(ts.rows(), ts.cols());
                    for (r, &t) in index.iter().enumerate() {
                        ds.row_mut(r).copy_from_slice(g.row(t));
                    }
                    accumulate(&mut grads, *src, ds)?;
                }
                Op::Silu(a) => {
                    let ta = self.value(*a);
                    let mut da = g.clone();
                    for (d, &x) in da.data_mut().iter_mut().zip(ta.data()) {
                        let s = sigmoid(x);
                        *d *= s * (1.0 + x * (1.0 - s));
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Tanh(a) => {
                    let tv = &node.value;
                    let mut da = g.clone();
                    for (d, &y) in da.data_mut().iter_mut().zip(tv.data()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Sigmoid(a) => {
                    let tv = &node.value;
                    let mut da = g.clone();
                    for (d, &y) in da.data_mut().iter_mut().zip(tv.data()) {
                        *d *= y * (1.0 - y);
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::LayerNorm(a) => {
                    let ta = self.value(*a);
                    let ty = &node.value;
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    let n = ta.cols() as f64;
                    for r in 0..ta.rows() {
                        let (_, inv_std) = row_norm_stats(ta.row(r));
                        let yrow = ty.row(r);
                        let grow = g.row(r);
                        let mean_g: f64 = grow.iter().sum::<f64>() / n;
                        let mean_gy: f64 =
                            grow.iter().zip(yrow).map(|(gi, yi)| gi * yi).sum::<f64>() / n;
                        for ((o, &gi), &yi) in da.row_mut(r).iter_mut().zip(grow).zip(yrow) {
                            *o = inv_std * (gi - mean_g - yi * mean_gy);
                        }
                    }
                    accumulate(&mut grads, *a, da)?;
                }
                Op::Mse(a, b) => {
                    let (ta, tb) = (self.value(*a), self.value(*b));
                    let n = ta.len().max(1) as f64;
                    let go = g.item() * 2.0 / n;
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for ((o, &x), &y) in da.data_mut().iter_mut().zip(ta.data()).zip(tb.data()) {
                        *o = go * (x - y);
                    }
                    let db = da.scale(-1.0);
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::RowScale(a, s) => {
                    let (ta, ts) = (self.value(*a), self.value(*s));
                    let mut da = g.clone();
                    let mut dsv = Tensor::zeros(ts.rows(), 1);
                    for r in 0..ta.rows() {
                        let f = ts.get(r, 0);
                        let mut dot = 0.0;
                        let arow = ta.row(r).to_vec();
                        for (d, &x) in da.row_mut(r).iter_mut().zip(&arow) {
                            dot += *d * x;
                            *d *= f;
                        }
                        dsv.set(r, 0, dot);
                    }
                    accumulate(&mut grads, *a, da)?;
                    accumulate(&mut grads, *s, dsv)?;
                }
                Op::BiasAdd(a, b) => {
                    let tb = self.value(*b);
                    let mut db = Tensor::zeros(1, tb.cols());
                    for r in 0..g.rows() {
                        for (o, &v) in db.row_mut(0).iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g)?;
                    accumulate(&mut grads, *b, db)?;
                }
                Op::SliceCols(a, c0, _c1) => {
                    let ta = self.value(*a);
                    let mut da = Tensor::zeros(ta.rows(), ta.cols());
                    for r in 0..g.rows() {
                        let grow = g.row(r).to_vec();
                        da.row_mut(r)[*c0..*c0 + grow.len()].copy_from_slice(&grow);
                    }
                    accumulate(&mut grads, *a, da)?;
                }
            }
        }
        Ok(Gradients { by_slot })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, delta: Tensor) -> Result<()> {
    match &mut grads[id.0] {
        Some(g) => {
            *g = g.add_scaled(&delta, 1.0)?;
        }
        slot @ None => {
            *slot = Some(delta);
        }
    }
    Ok(())
}

fn cmp_rows(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let ord = x.total_cmp(y);
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    std::cmp::Ordering::Equal
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn row_norm_stats(row: &[f64]) -> (f64, f64) {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, 1.0 / (var + LAYER_NORM_EPS).sqrt())
}

/// Parameter gradients from one backward pass.
#[derive(Debug)]
pub struct Gradients {
    by_slot: HashMap<usize, Tensor>,
}

impl Gradients {
    pub fn for_slot(&self, slot: usize) -> Option<&Tensor> {
        self.by_slot.get(&slot)
    }

    /// Flatten to the store's layout; untouched parameters contribute zeros.
    pub fn flatten(&self, store: &ParamStore) -> Vec<f64> {
        let mut out = vec![0.0; store.n_flat()];
        for (&slot, grad) in &self.by_slot {
            let (start, len) = store.slot_range(slot);
            debug_assert_eq!(len, grad.len());
            out[start..start + len].copy_from_slice(grad.data());
        }
        out
    }
}
