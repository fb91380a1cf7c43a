//! Define-by-run computation graph with reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so the node vector is already a
//! topological order and `backward` walks it in reverse exactly once.

use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::{gemm, MatRef, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul,
    BatchMatMul { trans_b: bool },
    AddBias,
    Add,
    Relu,
    Softmax,
    Scale(f64),
    Reshape,
    /// `map[dst] = src` flat-index gather.
    Permute(Vec<usize>),
    Stack,
    Im2Col {
        kernel: usize,
        stride: usize,
        pad: usize,
    },
    MeanAxis1,
    Mse,
    Dot,
    SumSquares,
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::BatchMatMul { .. } => "batch_matmul",
            Op::AddBias => "add_bias",
            Op::Add => "add",
            Op::Relu => "relu",
            Op::Softmax => "softmax",
            Op::Scale(_) => "scale",
            Op::Reshape => "reshape",
            Op::Permute(_) => "permute",
            Op::Stack => "stack",
            Op::Im2Col { .. } => "im2col",
            Op::MeanAxis1 => "mean_axis1",
            Op::Mse => "mse",
            Op::Dot => "dot",
            Op::SumSquares => "sum_squares",
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    inputs: Vec<NodeId>,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: BTreeMap<String, NodeId>,
    scope: String,
}

/// Gradients from one backward pass. Only leaves keep theirs; intermediate
/// gradients are released as soon as they have been propagated.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: BTreeMap<String, NodeId>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads[id.0].as_ref()
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name).and_then(|id| self.get(*id))
    }

    /// Parameter gradients keyed by name; parameters the loss does not
    /// depend on get zero tensors of the right shape via `store`.
    pub fn into_param_grads(mut self, store: &ParamStore) -> BTreeMap<String, Tensor> {
        store
            .iter()
            .map(|(name, t)| {
                let g = self
                    .params
                    .get(name)
                    .and_then(|id| self.grads[id.0].take())
                    .unwrap_or_else(|| Tensor::zeros(t.shape()));
                (name.clone(), g)
            })
            .collect()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Label attached to non-finite errors raised by subsequent ops.
    pub fn set_scope(&mut self, scope: impl Into<String>) {
        self.scope = scope.into();
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, inputs: Vec<NodeId>, value: Tensor) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op.name(),
                scope: self.scope.clone(),
            });
        }
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            inputs,
            value,
            requires_grad,
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    /// Constant input; no gradient flows into it.
    pub fn input(&mut self, value: Tensor) -> Result<NodeId> {
        self.push(Op::Leaf, Vec::new(), value)
    }

    /// Trainable leaf registered under `name`.
    pub fn param(&mut self, name: &str, value: Tensor) -> Result<NodeId> {
        if let Some(id) = self.params.get(name) {
            return Ok(*id);
        }
        let id = self.push(Op::Leaf, Vec::new(), value)?;
        self.nodes[id.0].requires_grad = true;
        self.params.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn param_from(&mut self, store: &ParamStore, name: &str) -> Result<NodeId> {
        if let Some(id) = self.params.get(name) {
            return Ok(*id);
        }
        let t = store.get(name)?.clone();
        self.param(name, t)
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::shape("matmul", format!("{sa:?} x {sb:?}")));
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        gemm(
            MatRef::new(self.value(a).data(), m, k),
            MatRef::new(self.value(b).data(), k, n),
            0.0,
            &mut out,
        );
        let value = Tensor::new(&[m, n], out)?;
        self.push(Op::MatMul, vec![a, b], value)
    }

    /// `[g, m, k] x [g, k, n]`, or `[g, m, k] x [g, n, k]ᵀ` with `trans_b`.
    pub fn batch_matmul(&mut self, a: NodeId, b: NodeId, trans_b: bool) -> Result<NodeId> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let ok = sa.len() == 3
            && sb.len() == 3
            && sa[0] == sb[0]
            && if trans_b { sa[2] == sb[2] } else { sa[2] == sb[1] };
        if !ok {
            return Err(Error::shape("batch_matmul", format!("{sa:?} x {sb:?}")));
        }
        let (g, m, k) = (sa[0], sa[1], sa[2]);
        let n = if trans_b { sb[1] } else { sb[2] };
        let mut out = vec![0.0; g * m * n];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        for i in 0..g {
            let am = MatRef::new(&av[i * m * k..(i + 1) * m * k], m, k);
            let bs = &bv[i * k * n..(i + 1) * k * n];
            let bm = if trans_b {
                MatRef::new(bs, n, k).t()
            } else {
                MatRef::new(bs, k, n)
            };
            gemm(am, bm, 0.0, &mut out[i * m * n..(i + 1) * m * n]);
        }
        let value = Tensor::new(&[g, m, n], out)?;
        self.push(Op::BatchMatMul { trans_b }, vec![a, b], value)
    }

    pub fn add_bias(&mut self, x: NodeId, b: NodeId) -> Result<NodeId> {
        let (rows, cols) = self.value(x).as_matrix();
        if self.shape(b) != [cols] {
            return Err(Error::shape(
                "add_bias",
                format!("{:?} + {:?}", self.shape(x), self.shape(b)),
            ));
        }
        let mut value = self.value(x).clone();
        let bias = self.value(b).data();
        for r in 0..rows {
            for (v, bb) in value.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(bias) {
                *v += bb;
            }
        }
        self.push(Op::AddBias, vec![x, b], value)
    }

    pub fn add(&mut self, x: NodeId, y: NodeId) -> Result<NodeId> {
        if self.shape(x) != self.shape(y) {
            return Err(Error::shape(
                "add",
                format!("{:?} + {:?}", self.shape(x), self.shape(y)),
            ));
        }
        let mut value = self.value(x).clone();
        value.add_assign(self.value(y));
        self.push(Op::Add, vec![x, y], value)
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            if *v <= 0.0 {
                *v = 0.0;
            }
        }
        self.push(Op::Relu, vec![x], value)
    }

    /// Softmax over the last axis with max subtraction.
    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        let (_, cols) = value.as_matrix();
        if cols == 0 {
            return Err(Error::shape("softmax", "empty last axis"));
        }
        for row in value.data_mut().chunks_mut(cols) {
            softmax_row(row);
        }
        self.push(Op::Softmax, vec![x], value)
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let mut value = self.value(x).clone();
        for v in value.data_mut() {
            *v *= c;
        }
        self.push(Op::Scale(c), vec![x], value)
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let value = self.value(x).clone().reshape(shape)?;
        self.push(Op::Reshape, vec![x], value)
    }

    /// Axis permutation: output axis `i` is input axis `perm[i]`.
    pub fn permute(&mut self, x: NodeId, perm: &[usize]) -> Result<NodeId> {
        let in_shape = self.shape(x).to_vec();
        let rank = in_shape.len();
        let mut seen = vec![false; rank];
        if perm.len() != rank || perm.iter().any(|&p| p >= rank || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::shape("permute", format!("{perm:?} on {in_shape:?}")));
        }
        let mut in_strides = vec![1; rank];
        for i in (0..rank.saturating_sub(1)).rev() {
            in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
        }
        let out_shape: Vec<usize> = perm.iter().map(|&p| in_shape[p]).collect();
        let total: usize = out_shape.iter().product();
        let mut map = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for _ in 0..total {
            map.push(idx.iter().zip(perm).map(|(i, &p)| i * in_strides[p]).sum());
            for ax in (0..rank).rev() {
                idx[ax] += 1;
                if idx[ax] < out_shape[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        let src = self.value(x).data();
        let data = map.iter().map(|&s| src[s]).collect();
        let value = Tensor::new(&out_shape, data)?;
        self.push(Op::Permute(map), vec![x], value)
    }

    /// Stacks equally shaped `[b, d]` tensors into `[b, n, d]`.
    pub fn stack(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        let first = xs
            .first()
            .ok_or_else(|| Error::shape("stack", "no inputs"))?;
        let s = self.shape(*first).to_vec();
        if s.len() != 2 || xs.iter().any(|x| self.shape(*x) != s.as_slice()) {
            return Err(Error::shape("stack", "inputs must share a [b, d] shape"));
        }
        let (b, d, n) = (s[0], s[1], xs.len());
        let mut data = vec![0.0; b * n * d];
        for (j, x) in xs.iter().enumerate() {
            let v = self.value(*x).data();
            for r in 0..b {
                data[(r * n + j) * d..(r * n + j + 1) * d].copy_from_slice(&v[r * d..(r + 1) * d]);
            }
        }
        let value = Tensor::new(&[b, n, d], data)?;
        self.push(Op::Stack, xs.to_vec(), value)
    }

    /// Unfolds `[b, len, ch]` into `[b·out_len, kernel·ch]` patches
    /// (kernel-major columns) with zero padding.
    pub fn im2col(&mut self, x: NodeId, kernel: usize, stride: usize, pad: usize) -> Result<NodeId> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || kernel == 0 || stride == 0 || s[1] + 2 * pad < kernel {
            return Err(Error::shape(
                "im2col",
                format!("{s:?} kernel {kernel} stride {stride} pad {pad}"),
            ));
        }
        let (b, len, ch) = (s[0], s[1], s[2]);
        let out_len = (len + 2 * pad - kernel) / stride + 1;
        let src = self.value(x).data();
        let cols = kernel * ch;
        let mut data = vec![0.0; b * out_len * cols];
        for bi in 0..b {
            for o in 0..out_len {
                let row = &mut data[(bi * out_len + o) * cols..(bi * out_len + o + 1) * cols];
                for kk in 0..kernel {
                    let l = (o * stride + kk) as isize - pad as isize;
                    if l >= 0 && (l as usize) < len {
                        let off = (bi * len + l as usize) * ch;
                        row[kk * ch..(kk + 1) * ch].copy_from_slice(&src[off..off + ch]);
                    }
                }
            }
        }
        let value = Tensor::new(&[b * out_len, cols], data)?;
        self.push(Op::Im2Col { kernel, stride, pad }, vec![x], value)
    }

    /// Mean over axis 1 of `[b, l, c]`.
    pub fn mean_axis1(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || s[1] == 0 {
            return Err(Error::shape("mean_axis1", format!("{s:?}")));
        }
        let (b, l, c) = (s[0], s[1], s[2]);
        let src = self.value(x).data();
        let mut data = vec![0.0; b * c];
        for bi in 0..b {
            let out = &mut data[bi * c..(bi + 1) * c];
            for li in 0..l {
                for (o, v) in out.iter_mut().zip(&src[(bi * l + li) * c..(bi * l + li + 1) * c]) {
                    *o += v;
                }
            }
            for o in out.iter_mut() {
                *o /= l as f64;
            }
        }
        let value = Tensor::new(&[b, c], data)?;
        self.push(Op::MeanAxis1, vec![x], value)
    }

    /// Mean squared error over all elements; scalar.
    pub fn mse(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::shape(
                "mse",
                format!("{:?} vs {:?}", self.shape(pred), self.shape(target)),
            ));
        }
        let (p, t) = (self.value(pred).data(), self.value(target).data());
        let sum: f64 = p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
        let value = Tensor::scalar(sum / p.len() as f64);
        self.push(Op::Mse, vec![pred, target], value)
    }

    /// `Σ x·y`; scalar.
    pub fn dot(&mut self, x: NodeId, y: NodeId) -> Result<NodeId> {
        if self.value(x).len() != self.value(y).len() {
            return Err(Error::shape("dot", "length mismatch"));
        }
        let s: f64 = self
            .value(x)
            .data()
            .iter()
            .zip(self.value(y).data())
            .map(|(a, b)| a * b)
            .sum();
        self.push(Op::Dot, vec![x, y], Tensor::scalar(s))
    }

    pub fn sum_squares(&mut self, x: NodeId) -> Result<NodeId> {
        let s: f64 = self.value(x).data().iter().map(|v| v * v).sum();
        self.push(Op::SumSquares, vec![x], Tensor::scalar(s))
    }

    /// Hash of every ReLU's active set; equal signatures mean the same
    /// piecewise-linear region.
    pub fn activation_signature(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for node in self.nodes.iter().filter(|n| matches!(n.op, Op::Relu)) {
            for chunk in node.value.data().chunks(64) {
                let mut bits = 0u64;
                for (i, v) in chunk.iter().enumerate() {
                    if *v > 0.0 {
                        bits |= 1 << i;
                    }
                }
                h = (h ^ bits).wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        h
    }

    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!("non-scalar loss of shape {:?}", self.shape(loss)),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(self.shape(loss), vec![1.0])?);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad || node.inputs.is_empty() {
                continue;
            }
            let Some(gy) = grads[idx].take() else {
                continue;
            };
            let wants = |i: usize| self.nodes[node.inputs[i].0].requires_grad;
            let mut contribs: Vec<(NodeId, Tensor)> = Vec::with_capacity(node.inputs.len());

            match &node.op {
                Op::Leaf => {}
                Op::MatMul => {
                    let (a, b) = (&self.nodes[node.inputs[0].0].value, &self.nodes[node.inputs[1].0].value);
                    let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
                    if wants(0) {
                        let mut da = vec![0.0; m * k];
                        gemm(
                            MatRef::new(gy.data(), m, n),
                            MatRef::new(b.data(), k, n).t(),
                            0.0,
                            &mut da,
                        );
                        contribs.push((node.inputs[0], Tensor::new(&[m, k], da)?));
                    }
                    if wants(1) {
                        let mut db = vec![0.0; k * n];
                        gemm(
                            MatRef::new(a.data(), m, k).t(),
                            MatRef::new(gy.data(), m, n),
                            0.0,
                            &mut db,
                        );
                        contribs.push((node.inputs[1], Tensor::new(&[k, n], db)?));
                    }
                }
                Op::BatchMatMul { trans_b } => {
                    let (a, b) = (&self.nodes[node.inputs[0].0].value, &self.nodes[node.inputs[1].0].value);
                    let (g, m, k) = (a.shape()[0], a.shape()[1], a.shape()[2]);
                    let n = gy.shape()[2];
                    if wants(0) {
                        let mut da = vec![0.0; g * m * k];
                        for i in 0..g {
                            let dy = MatRef::new(&gy.data()[i * m * n..(i + 1) * m * n], m, n);
                            let bs = &b.data()[i * k * n..(i + 1) * k * n];
                            let bm = if *trans_b {
                                MatRef::new(bs, n, k)
                            } else {
                                MatRef::new(bs, k, n).t()
                            };
                            gemm(dy, bm, 0.0, &mut da[i * m * k..(i + 1) * m * k]);
                        }
                        contribs.push((node.inputs[0], Tensor::new(a.shape(), da)?));
                    }
                    if wants(1) {
                        let mut db = vec![0.0; g * k * n];
                        for i in 0..g {
                            let dy = MatRef::new(&gy.data()[i * m * n..(i + 1) * m * n], m, n);
                            let am = MatRef::new(&a.data()[i * m * k..(i + 1) * m * k], m, k);
                            let out = &mut db[i * k * n..(i + 1) * k * n];
                            if *trans_b {
                                gemm(dy.t(), am, 0.0, out);
                            } else {
                                gemm(am.t(), dy, 0.0, out);
                            }
                        }
                        contribs.push((node.inputs[1], Tensor::new(b.shape(), db)?));
                    }
                }
                Op::AddBias => {
                    if wants(0) {
                        contribs.push((node.inputs[0], gy.clone()));
                    }
                    if wants(1) {
                        let (_, cols) = gy.as_matrix();
                        let mut db = vec![0.0; cols];
                        for row in gy.data().chunks(cols) {
                            for (d, v) in db.iter_mut().zip(row) {
                                *d += v;
                            }
                        }
                        contribs.push((node.inputs[1], Tensor::new(&[cols], db)?));
                    }
                }
                Op::Add => {
                    for i in 0..2 {
                        if wants(i) {
                            contribs.push((node.inputs[i], gy.clone()));
                        }
                    }
                }
                Op::Relu => {
                    let mut dx = gy.clone();
                    for (d, y) in dx.data_mut().iter_mut().zip(node.value.data()) {
                        if *y <= 0.0 {
                            *d = 0.0;
                        }
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::Softmax => {
                    let mut dx = gy.clone();
                    let (_, cols) = dx.as_matrix();
                    for (drow, yrow) in dx.data_mut().chunks_mut(cols).zip(node.value.data().chunks(cols)) {
                        let s: f64 = drow.iter().zip(yrow).map(|(d, y)| d * y).sum();
                        for (d, y) in drow.iter_mut().zip(yrow) {
                            *d = y * (*d - s);
                        }
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::Scale(c) => {
                    let mut dx = gy.clone();
                    for d in dx.data_mut() {
                        *d *= c;
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::Reshape => {
                    let shape = self.shape(node.inputs[0]);
                    contribs.push((node.inputs[0], gy.clone().reshape(shape)?));
                }
                Op::Permute(map) => {
                    let mut dx = Tensor::zeros(self.shape(node.inputs[0]));
                    let dxd = dx.data_mut();
                    for (dst, &src) in map.iter().enumerate() {
                        dxd[src] += gy.data()[dst];
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::Stack => {
                    let (b, n, d) = (gy.shape()[0], gy.shape()[1], gy.shape()[2]);
                    for (j, input) in node.inputs.iter().enumerate() {
                        if !wants(j) {
                            continue;
                        }
                        let mut dx = vec![0.0; b * d];
                        for r in 0..b {
                            dx[r * d..(r + 1) * d]
                                .copy_from_slice(&gy.data()[(r * n + j) * d..(r * n + j + 1) * d]);
                        }
                        contribs.push((*input, Tensor::new(&[b, d], dx)?));
                    }
                }
                Op::Im2Col { kernel, stride, pad } => {
                    let s = self.shape(node.inputs[0]);
                    let (b, len, ch) = (s[0], s[1], s[2]);
                    let out_len = gy.shape()[0] / b;
                    let cols = kernel * ch;
                    let mut dx = Tensor::zeros(s);
                    let dxd = dx.data_mut();
                    for bi in 0..b {
                        for o in 0..out_len {
                            let row = &gy.data()[(bi * out_len + o) * cols..(bi * out_len + o + 1) * cols];
                            for kk in 0..*kernel {
                                let l = (o * stride + kk) as isize - *pad as isize;
                                if l >= 0 && (l as usize) < len {
                                    let off = (bi * len + l as usize) * ch;
                                    for (d, v) in dxd[off..off + ch].iter_mut().zip(&row[kk * ch..(kk + 1) * ch]) {
                                        *d += v;
                                    }
                                }
                            }
                        }
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::MeanAxis1 => {
                    let s = self.shape(node.inputs[0]);
                    let (b, l, c) = (s[0], s[1], s[2]);
                    let mut dx = Tensor::zeros(s);
                    let dxd = dx.data_mut();
                    for bi in 0..b {
                        let g = &gy.data()[bi * c..(bi + 1) * c];
                        for li in 0..l {
                            for (d, v) in dxd[(bi * l + li) * c..(bi * l + li + 1) * c].iter_mut().zip(g) {
                                *d = v / l as f64;
                            }
                        }
                    }
                    contribs.push((node.inputs[0], dx));
                }
                Op::Mse => {
                    let (p, t) = (&self.nodes[node.inputs[0].0].value, &self.nodes[node.inputs[1].0].value);
                    let scale = 2.0 * gy.item() / p.len() as f64;
                    let dp: Vec<f64> = p.data().iter().zip(t.data()).map(|(a, b)| scale * (a - b)).collect();
                    if wants(1) {
                        let dt: Vec<f64> = dp.iter().map(|v| -v).collect();
                        contribs.push((node.inputs[1], Tensor::new(t.shape(), dt)?));
                    }
                    if wants(0) {
                        contribs.push((node.inputs[0], Tensor::new(p.shape(), dp)?));
                    }
                }
                Op::Dot => {
                    let g = gy.item();
                    let (x, y) = (&self.nodes[node.inputs[0].0].value, &self.nodes[node.inputs[1].0].value);
                    if wants(0) {
                        let d = y.data().iter().map(|v| g * v).collect();
                        contribs.push((node.inputs[0], Tensor::new(x.shape(), d)?));
                    }
                    if wants(1) {
                        let d = x.data().iter().map(|v| g * v).collect();
                        contribs.push((node.inputs[1], Tensor::new(y.shape(), d)?));
                    }
                }
                Op::SumSquares => {
                    let g = gy.item();
                    let x = &self.nodes[node.inputs[0].0].value;
                    let d = x.data().iter().map(|v| 2.0 * g * v).collect();
                    contribs.push((node.inputs[0], Tensor::new(x.shape(), d)?));
                }
            }

            for (id, t) in contribs {
                if !self.nodes[id.0].requires_grad {
                    continue;
                }
                match &mut grads[id.0] {
                    Some(acc) => acc.add_assign(&t),
                    slot @ None => *slot = Some(t),
                }
            }
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }
}

pub(crate) fn softmax_row(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
