//! Layers built from graph primitives. Parameters are looked up by name
//! prefix in a [`ParamStore`]: a linear layer `enc.l1` owns `enc.l1.w`
//! (`[in, out]`) and `enc.l1.b` (`[out]`).

use rand::Rng;

use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// LeCun-uniform weights in `±√(3/fan_in)` (unit variance), bias zero.
pub fn init_linear(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut impl Rng) {
    let bound = (3.0 / fan_in as f64).sqrt();
    store.insert(format!("{name}.w"), Tensor::uniform(&[fan_in, fan_out], bound, rng));
    store.insert(format!("{name}.b"), Tensor::zeros(&[fan_out]));
}

pub fn linear(g: &mut Graph, store: &ParamStore, name: &str, x: NodeId) -> Result<NodeId> {
    let w = g.param_from(store, &format!("{name}.w"))?;
    let b = g.param_from(store, &format!("{name}.b"))?;
    let y = g.matmul(x, w)?;
    g.add_bias(y, b)
}

/// `in → hidden → out` with a ReLU between the two linear layers.
pub fn init_mlp(store: &mut ParamStore, name: &str, dims: [usize; 3], rng: &mut impl Rng) {
    init_linear(store, &format!("{name}.l1"), dims[0], dims[1], rng);
    init_linear(store, &format!("{name}.l2"), dims[1], dims[2], rng);
}

pub fn mlp(g: &mut Graph, store: &ParamStore, name: &str, x: NodeId) -> Result<NodeId> {
    let h = linear(g, store, &format!("{name}.l1"), x)?;
    let h = g.relu(h)?;
    linear(g, store, &format!("{name}.l2"), h)
}

pub fn init_residual(store: &mut ParamStore, name: &str, dim: usize, width: usize, rng: &mut impl Rng) {
    init_mlp(store, name, [dim, width, dim], rng);
}

/// `y = x + F(x)` where `F` is linear → ReLU → linear.
pub fn residual_block(g: &mut Graph, store: &ParamStore, name: &str, x: NodeId) -> Result<NodeId> {
    let f = mlp(g, store, name, x)?;
    g.add(x, f)
}

pub fn init_attention(store: &mut ParamStore, name: &str, dim: usize, rng: &mut impl Rng) {
    for p in ["q", "k", "v", "o"] {
        init_linear(store, &format!("{name}.{p}"), dim, dim, rng);
    }
}

/// Scaled dot-product attention with `heads` heads over `tokens` tokens per
/// batch item. `x` is `[batch·tokens, dim]`; the output has the same shape.
pub fn multi_head_attention(
    g: &mut Graph,
    store: &ParamStore,
    name: &str,
    x: NodeId,
    batch: usize,
    tokens: usize,
    heads: usize,
) -> Result<NodeId> {
    let shape = g.value(x).shape().to_vec();
    if shape.len() != 2 || shape[0] != batch * tokens {
        return Err(Error::shape(
            "multi_head_attention",
            format!("input {shape:?} for batch {batch} × {tokens} tokens"),
        ));
    }
    let dim = shape[1];
    if heads == 0 || dim % heads != 0 {
        return Err(Error::shape(
            "multi_head_attention",
            format!("dim {dim} not divisible by {heads} heads"),
        ));
    }
    let dh = dim / heads;
    let split = |g: &mut Graph, p: &str| -> Result<NodeId> {
        let y = linear(g, store, &format!("{name}.{p}"), x)?;
        let y = g.reshape(y, &[batch, tokens, heads, dh])?;
        let y = g.permute(y, &[0, 2, 1, 3])?;
        g.reshape(y, &[batch * heads, tokens, dh])
    };
    let q = split(g, "q")?;
    let k = split(g, "k")?;
    let v = split(g, "v")?;
    let scores = g.batch_matmul(q, k, true)?;
    let scores = g.scale(scores, 1.0 / (dh as f64).sqrt())?;
    let attn = g.softmax(scores)?;
    let ctx = g.batch_matmul(attn, v, false)?;
    let ctx = g.reshape(ctx, &[batch, heads, tokens, dh])?;
    let ctx = g.permute(ctx, &[0, 2, 1, 3])?;
    let ctx = g.reshape(ctx, &[batch * tokens, dim])?;
    linear(g, store, &format!("{name}.o"), ctx)
}

pub fn init_conv1d(
    store: &mut ParamStore,
    name: &str,
    in_ch: usize,
    out_ch: usize,
    kernel: usize,
    rng: &mut impl Rng,
) {
    init_linear(store, name, kernel * in_ch, out_ch, rng);
}

/// 1-D convolution over axis 1 of `[batch, len, in_ch]`, channels last.
/// Weights are `[kernel·in_ch, out_ch]`, kernel-major rows.
pub fn conv1d(
    g: &mut Graph,
    store: &ParamStore,
    name: &str,
    x: NodeId,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<NodeId> {
    let batch = g.value(x).shape()[0];
    let cols = g.im2col(x, kernel, stride, pad)?;
    let y = linear(g, store, name, cols)?;
    let out_ch = g.value(y).shape()[1];
    let out_len = g.value(y).shape()[0] / batch;
    g.reshape(y, &[batch, out_len, out_ch])
}
