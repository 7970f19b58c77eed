use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::params::{ParamId, Params};
use super::sparse::SparseMatrix;
use super::tensor::{matmul_nt_acc, matmul_tn_acc, Tensor};
use crate::error::{bail, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    AddBias(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    SpMM(Arc<SparseMatrix>, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Arc<[usize]>),
    Relu(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Sum(Var),
    Pick(Var, usize),
    Reshape(Var),
    /// Softmax over contiguous groups of a flattened tensor; `offsets` has
    /// one entry per group boundary (first 0, last = len).
    SegmentSoftmax(Var, Arc<[usize]>),
    LogSoftmaxRows(Var),
    /// Mean negative log-likelihood over `(row, class)` picks.
    NllPick(Var, Arc<[(usize, usize)]>),
    /// `out[src[e]] += alpha[e] · values[dst[e]]`.
    EdgeAggregate {
        alpha: Var,
        values: Var,
        src: Arc<[usize]>,
        dst: Arc<[usize]>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Record of primitive applications for one forward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(Var, ParamId)>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
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

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// Constant input; no gradient is tracked.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Differentiable leaf.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Register one parameter of `params` as a differentiable leaf.
    pub fn param(&mut self, params: &Params, id: ParamId) -> Var {
        let v = self.variable(params.get(id).clone());
        self.params.push((v, id));
        v
    }

    /// Register every parameter, in id order.
    pub fn bind(&mut self, params: &Params) -> Vec<Var> {
        params.ids().map(|id| self.param(params, id)).collect()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::MatMul(a, b), ng))
    }

    /// Adds a `1×m` bias row to every row of an `n×m` tensor.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(b));
        if bv.rows() != 1 || bv.cols() != xv.cols() {
            bail!(Shape, "bias {:?} for input {:?}", bv.shape(), xv.shape());
        }
        let mut out = xv.clone();
        for r in 0..out.rows() {
            for (o, bb) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += bb;
            }
        }
        let ng = self.ng(x) || self.ng(b);
        Ok(self.push(out, Op::AddBias(x, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            bail!(Shape, "add {:?} and {:?}", av.shape(), bv.shape());
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Add(a, b), ng))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            bail!(Shape, "mul {:?} and {:?}", av.shape(), bv.shape());
        }
        let data = av.data().iter().zip(bv.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(out, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let out = self.value(x).map(|v| v * s);
        let ng = self.ng(x);
        self.push(out, Op::Scale(x, s), ng)
    }

    /// `Â · X` for a constant sparse `Â`.
    pub fn sparse_aggregate(&mut self, adj: Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let out = adj.mul_dense(self.value(x))?;
        let ng = self.ng(x);
        Ok(self.push(out, Op::SpMM(adj, x), ng))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { bail!(Shape, "concat of nothing") };
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            if self.value(p).rows() != rows {
                bail!(Shape, "concat_cols row mismatch {} vs {}", self.value(p).rows(), rows);
            }
            cols += self.value(p).cols();
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else { bail!(Shape, "concat of nothing") };
        let cols = self.value(first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != cols {
                bail!(Shape, "concat_rows col mismatch {} vs {}", v.cols(), cols);
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let out = Tensor::from_vec(rows, cols, data)?;
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn gather_rows(&mut self, x: Var, idx: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        let mut out = Tensor::zeros(idx.len(), xv.cols());
        for (i, &r) in idx.iter().enumerate() {
            if r >= xv.rows() {
                bail!(Shape, "gather row {} of {}", r, xv.rows());
            }
            out.row_mut(i).copy_from_slice(xv.row(r));
        }
        let ng = self.ng(x);
        Ok(self.push(out, Op::GatherRows(x, idx), ng))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        let ng = self.ng(x);
        self.push(out, Op::Relu(x), ng)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let out = self.value(x).map(|v| if v > 0.0 { v } else { slope * v });
        let ng = self.ng(x);
        self.push(out, Op::LeakyRelu(x, slope), ng)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let out = self.value(x).map(libm::exp);
        let ng = self.ng(x);
        self.push(out, Op::Exp(x), ng)
    }

    /// Sum of all entries, as a `1×1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let ng = self.ng(x);
        self.push(Tensor::scalar(s), Op::Sum(x), ng)
    }

    /// Entry `i` of the flattened tensor, as `1×1`.
    pub fn pick(&mut self, x: Var, i: usize) -> Result<Var> {
        let Some(&v) = self.value(x).data().get(i) else { bail!(Shape, "pick {} of {}", i, self.value(x).len()) };
        let ng = self.ng(x);
        Ok(self.push(Tensor::scalar(v), Op::Pick(x, i), ng))
    }

    pub fn reshape(&mut self, x: Var, rows: usize, cols: usize) -> Result<Var> {
        let out = self.value(x).clone().reshape(rows, cols)?;
        let ng = self.ng(x);
        Ok(self.push(out, Op::Reshape(x), ng))
    }

    /// Softmax over every entry of `x`.
    pub fn softmax_over_set(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        self.segment_softmax(x, Arc::from(vec![0, n]))
    }

    /// Softmax within each contiguous group `[offsets[i], offsets[i+1])` of the
    /// flattened input.
    pub fn segment_softmax(&mut self, x: Var, offsets: Arc<[usize]>) -> Result<Var> {
        let xv = self.value(x);
        if offsets.first() != Some(&0) || offsets.last() != Some(&xv.len()) || offsets.windows(2).any(|w| w[0] > w[1]) {
            bail!(Shape, "segment offsets do not cover {} entries", xv.len());
        }
        let mut out = xv.clone();
        for w in offsets.windows(2) {
            softmax_in_place(&mut out.data_mut()[w[0]..w[1]]);
        }
        let ng = self.ng(x);
        Ok(self.push(out, Op::SegmentSoftmax(x, offsets), ng))
    }

    pub fn log_softmax_rows(&mut self, x: Var) -> Var {
        let mut out = self.value(x).clone();
        for r in 0..out.rows() {
            log_softmax_in_place(out.row_mut(r));
        }
        let ng = self.ng(x);
        self.push(out, Op::LogSoftmaxRows(x), ng)
    }

    /// Mean of `-logprobs[row, class]` over `picks`.
    pub fn nll_pick(&mut self, logprobs: Var, picks: Arc<[(usize, usize)]>) -> Result<Var> {
        let lp = self.value(logprobs);
        if picks.is_empty() {
            bail!(Input, "nll over an empty pick set");
        }
        let mut s = 0.0;
        for &(r, c) in picks.iter() {
            if r >= lp.rows() || c >= lp.cols() {
                bail!(Shape, "pick ({}, {}) outside {:?}", r, c, lp.shape());
            }
            s -= lp.get(r, c);
        }
        let out = Tensor::scalar(s / picks.len() as f64);
        let ng = self.ng(logprobs);
        Ok(self.push(out, Op::NllPick(logprobs, picks), ng))
    }

    /// Attention-weighted neighbor sum: `out[src[e]] += alpha[e] · values[dst[e]]`
    /// with `out` having as many rows as `values`.
    pub fn edge_aggregate(&mut self, alpha: Var, values: Var, src: Arc<[usize]>, dst: Arc<[usize]>) -> Result<Var> {
        let (av, vv) = (self.value(alpha), self.value(values));
        if av.len() != src.len() || src.len() != dst.len() {
            bail!(Shape, "{} weights for {} / {} edge endpoints", av.len(), src.len(), dst.len());
        }
        let mut out = Tensor::zeros(vv.rows(), vv.cols());
        for e in 0..src.len() {
            let (s, d) = (src[e], dst[e]);
            if s >= vv.rows() || d >= vv.rows() {
                bail!(Shape, "edge ({}, {}) outside {} rows", s, d, vv.rows());
            }
            let a = av.data()[e];
            for k in 0..vv.cols() {
                let add = a * vv.get(d, k);
                out.row_mut(s)[k] += add;
            }
        }
        let ng = self.ng(alpha) || self.ng(values);
        Ok(self.push(out, Op::EdgeAggregate { alpha, values, src, dst }, ng))
    }

    /// Reverse pass from a `1×1` root.
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        if self.value(root).len() != 1 {
            bail!(Shape, "backward from non-scalar {:?}", self.value(root).shape());
        }
        self.backward_with(root, Tensor::scalar(1.0))
    }

    /// Reverse pass seeded with an arbitrary upstream gradient for `root`.
    pub fn backward_with(&self, root: Var, seed: Tensor) -> Result<Gradients> {
        if seed.shape() != self.value(root).shape() {
            bail!(Shape, "seed {:?} for root {:?}", seed.shape(), self.value(root).shape());
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(seed);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Gradients of all parameters bound via [`Tape::param`], summed per id.
    pub fn param_grads(&self, grads: &Gradients, params: &Params) -> Vec<Tensor> {
        let mut out: Vec<Tensor> = params
            .ids()
            .map(|id| {
                let s = params.get(id).shape();
                Tensor::zeros(s[0], s[1])
            })
            .collect();
        for &(v, id) in &self.params {
            if let Some(g) = grads.get(v) {
                out[id.index()].add_assign(g);
            }
        }
        out
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    matmul_nt_acc(g, bv, slot(grads, *a, av));
                }
                if self.ng(*b) {
                    matmul_tn_acc(av, g, slot(grads, *b, bv));
                }
            }
            Op::AddBias(x, b) => {
                if self.ng(*x) {
                    slot(grads, *x, g).add_assign(g);
                }
                if self.ng(*b) {
                    let gb = slot(grads, *b, self.value(*b));
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.ng(*v) {
                        slot(grads, *v, g).add_assign(g);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.ng(*a) {
                    let ga = slot(grads, *a, av);
                    for ((o, gg), y) in ga.data_mut().iter_mut().zip(g.data()).zip(bv.data()) {
                        *o += gg * y;
                    }
                }
                if self.ng(*b) {
                    let gb = slot(grads, *b, bv);
                    for ((o, gg), x) in gb.data_mut().iter_mut().zip(g.data()).zip(av.data()) {
                        *o += gg * x;
                    }
                }
            }
            Op::Scale(x, s) => {
                let gx = slot(grads, *x, g);
                for (o, gg) in gx.data_mut().iter_mut().zip(g.data()) {
                    *o += s * gg;
                }
            }
            Op::SpMM(adj, x) => adj.mul_transpose_acc(g, slot(grads, *x, self.value(*x))),
            Op::ConcatCols(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.value(*p).cols();
                    if self.ng(*p) {
                        let gp = slot(grads, *p, self.value(*p));
                        for r in 0..g.rows() {
                            for (o, v) in gp.row_mut(r).iter_mut().zip(&g.row(r)[off..off + w]) {
                                *o += v;
                            }
                        }
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    if self.ng(*p) {
                        let gp = slot(grads, *p, self.value(*p));
                        for (o, v) in gp.data_mut().iter_mut().zip(&g.data()[off..off + n]) {
                            *o += v;
                        }
                    }
                    off += n;
                }
            }
            Op::GatherRows(x, idx) => {
                let gx = slot(grads, *x, self.value(*x));
                for (i, &r) in idx.iter().enumerate() {
                    for (o, v) in gx.row_mut(r).iter_mut().zip(g.row(i)) {
                        *o += v;
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                let gx = slot(grads, *x, xv);
                for ((o, gg), &xx) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                    if xx > 0.0 {
                        *o += gg;
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x);
                let gx = slot(grads, *x, xv);
                for ((o, gg), &xx) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                    *o += if xx > 0.0 { *gg } else { slope * gg };
                }
            }
            Op::Exp(x) => {
                let gx = slot(grads, *x, g);
                for ((o, gg), y) in gx.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                    *o += gg * y;
                }
            }
            Op::Sum(x) => {
                let gv = g.data()[0];
                for o in slot(grads, *x, self.value(*x)).data_mut() {
                    *o += gv;
                }
            }
            Op::Pick(x, i) => {
                slot(grads, *x, self.value(*x)).data_mut()[*i] += g.data()[0];
            }
            Op::Reshape(x) => {
                let gx = slot(grads, *x, self.value(*x));
                for (o, v) in gx.data_mut().iter_mut().zip(g.data()) {
                    *o += v;
                }
            }
            Op::SegmentSoftmax(x, offsets) => {
                let y = node.value.data();
                let gx = slot(grads, *x, self.value(*x));
                for w in offsets.windows(2) {
                    let dot: f64 = (w[0]..w[1]).map(|j| y[j] * g.data()[j]).sum();
                    for j in w[0]..w[1] {
                        gx.data_mut()[j] += y[j] * (g.data()[j] - dot);
                    }
                }
            }
            Op::LogSoftmaxRows(x) => {
                let y = &node.value;
                let gx = slot(grads, *x, self.value(*x));
                for r in 0..y.rows() {
                    let gs: f64 = g.row(r).iter().sum();
                    for ((o, gg), yy) in gx.row_mut(r).iter_mut().zip(g.row(r)).zip(y.row(r)) {
                        *o += gg - libm::exp(*yy) * gs;
                    }
                }
            }
            Op::NllPick(x, picks) => {
                let scale = g.data()[0] / picks.len() as f64;
                let gx = slot(grads, *x, self.value(*x));
                let cols = gx.cols();
                for &(r, c) in picks.iter() {
                    gx.data_mut()[r * cols + c] -= scale;
                }
            }
            Op::EdgeAggregate { alpha, values, src, dst } => {
                let (av, vv) = (self.value(*alpha), self.value(*values));
                if self.ng(*alpha) {
                    let ga = slot(grads, *alpha, av);
                    for e in 0..src.len() {
                        let dot: f64 = g.row(src[e]).iter().zip(vv.row(dst[e])).map(|(a, b)| a * b).sum();
                        ga.data_mut()[e] += dot;
                    }
                }
                if self.ng(*values) {
                    let gv = slot(grads, *values, vv);
                    for e in 0..src.len() {
                        let a = av.data()[e];
                        for k in 0..vv.cols() {
                            let add = a * g.get(src[e], k);
                            gv.row_mut(dst[e])[k] += add;
                        }
                    }
                }
            }
        }
    }
}

fn slot<'a>(grads: &'a mut [Option<Tensor>], v: Var, like: &Tensor) -> &'a mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(like.rows(), like.cols()))
}

/// Numerically stable in-place softmax.
pub(crate) fn softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in xs.iter_mut() {
        *x = libm::exp(*x - m);
        s += *x;
    }
    for x in xs.iter_mut() {
        *x /= s;
    }
}

pub(crate) fn log_softmax_in_place(xs: &mut [f64]) {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + libm::log(xs.iter().map(|x| libm::exp(x - m)).sum::<f64>());
    for x in xs.iter_mut() {
        *x -= lse;
    }
}
