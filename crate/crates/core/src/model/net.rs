//! Forward graphs for the fusion model and the convolutional baseline.
//!
//! Parameter names:
//! - `enc.{amp,phase,dop}.l{1,2}`: per-domain encoders, input → hidden → latent
//! - `fuse.attn.{q,k,v,o}`, `fuse.mlp.l{1,2}`: token fusion
//! - `backbone.{i}.l{1,2}`: residual blocks over the flattened tokens
//! - `head.l{1,2}`: regression head
//! - `base.conv{0,1,2}`, `base.res{i}.l{1,2}`, `base.head`: baseline

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ModelConfig, ModelKind, OUTPUT_DIM};
use crate::autodiff::nn;
use crate::autodiff::{Graph, NodeId, ParamStore, Tensor};
use crate::csi::N_FEATURES;
use crate::error::{Error, Result};
use crate::features::Domain;

pub fn init_params(kind: ModelKind, cfg: &ModelConfig, seed: u64) -> Result<ParamStore> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ParamStore::new();
    match kind {
        ModelKind::MiDiPose => {
            let d = cfg.latent;
            for dom in Domain::ALL {
                let name = format!("enc.{}", dom.name());
                nn::init_mlp(&mut p, &name, [cfg.input_dim(dom), cfg.encoder_hidden, d], &mut rng);
            }
            nn::init_attention(&mut p, "fuse.attn", d, &mut rng);
            nn::init_mlp(&mut p, "fuse.mlp", [d, 2 * d, d], &mut rng);
            for i in 0..cfg.blocks {
                nn::init_residual(&mut p, &format!("backbone.{i}"), cfg.fused_dim(), cfg.width, &mut rng);
            }
            nn::init_mlp(&mut p, "head", [cfg.fused_dim(), cfg.head_hidden, OUTPUT_DIM], &mut rng);
        }
        ModelKind::Baseline => {
            let b = &cfg.baseline;
            let mut in_ch = cfg.rrus * N_FEATURES;
            for (i, &out_ch) in b.conv_channels.iter().enumerate() {
                nn::init_conv1d(&mut p, &format!("base.conv{i}"), in_ch, out_ch, b.kernel, &mut rng);
                in_ch = out_ch;
            }
            for i in 0..b.res_blocks {
                nn::init_residual(&mut p, &format!("base.res{i}"), in_ch, b.res_width, &mut rng);
            }
            nn::init_linear(&mut p, "base.head", in_ch, OUTPUT_DIM, &mut rng);
        }
    }
    Ok(p)
}

/// Encoder inputs for a batch, one `[batch, input_dim]` tensor per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBatch {
    pub amplitude: Tensor,
    pub phase: Tensor,
    pub doppler: Tensor,
}

impl DomainBatch {
    pub fn get(&self, d: Domain) -> &Tensor {
        match d {
            Domain::Amplitude => &self.amplitude,
            Domain::Phase => &self.phase,
            Domain::Doppler => &self.doppler,
        }
    }

    pub fn batch(&self) -> usize {
        self.amplitude.shape()[0]
    }
}

fn check_rows(rows: &[&[f64]], cfg: &ModelConfig, op: &'static str) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::shape(op, "empty batch"));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != cfg.row_len()) {
        return Err(Error::shape(
            op,
            format!("feature row of {} values, expected {}", r.len(), cfg.row_len()),
        ));
    }
    if rows.iter().any(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFinite {
            op,
            scope: "input".into(),
        });
    }
    Ok(())
}

/// Splits `[subcarrier][rru][channel]` feature rows into per-domain
/// encoder inputs, keeping the cell-major order within each domain.
pub fn split_domains(rows: &[&[f64]], cfg: &ModelConfig) -> Result<DomainBatch> {
    check_rows(rows, cfg, "split_domains")?;
    let b = rows.len();
    let mk = |d: Domain| {
        let ch = d.channels();
        let mut out = Vec::with_capacity(b * cfg.input_dim(d));
        for r in rows {
            for cell in r.chunks_exact(N_FEATURES) {
                out.extend(ch.iter().map(|&c| cell[c]));
            }
        }
        Tensor::new(&[b, cfg.input_dim(d)], out)
    };
    Ok(DomainBatch {
        amplitude: mk(Domain::Amplitude)?,
        phase: mk(Domain::Phase)?,
        doppler: mk(Domain::Doppler)?,
    })
}

/// `[batch, subcarriers, rrus·7]`: the whole feature frame with RRU and
/// channel folded into conv input channels.
pub fn baseline_input(rows: &[&[f64]], cfg: &ModelConfig) -> Result<Tensor> {
    check_rows(rows, cfg, "baseline_input")?;
    let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Tensor::new(&[rows.len(), cfg.subcarriers, cfg.rrus * N_FEATURES], data)
}

/// `[batch, input_dim] → [batch, latent]`.
pub fn encode_domain(
    g: &mut Graph,
    p: &ParamStore,
    cfg: &ModelConfig,
    domain: Domain,
    x: NodeId,
) -> Result<NodeId> {
    let s = g.value(x).shape();
    if s.len() != 2 || s[1] != cfg.input_dim(domain) {
        return Err(Error::shape(
            "encode_domain",
            format!("{} input {:?}, expected [_, {}]", domain.name(), s, cfg.input_dim(domain)),
        ));
    }
    let name = format!("enc.{}", domain.name());
    g.set_scope(name.clone());
    nn::mlp(g, p, &name, x)
}

/// Fused tokens before flattening, `[batch·3, latent]` with token order
/// following `latents`.
pub fn fuse_tokens(g: &mut Graph, p: &ParamStore, cfg: &ModelConfig, latents: [NodeId; 3]) -> Result<NodeId> {
    let batch = g.value(latents[0]).shape()[0];
    g.set_scope("fuse");
    let tokens = g.stack(&latents)?;
    let tokens = g.reshape(tokens, &[batch * 3, cfg.latent])?;
    let mixed = match cfg.fusion {
        super::Fusion::Attention => {
            g.set_scope("fuse.attn");
            nn::multi_head_attention(g, p, "fuse.attn", tokens, batch, 3, cfg.heads)?
        }
        super::Fusion::Concat => tokens,
    };
    g.set_scope("fuse.mlp");
    nn::mlp(g, p, "fuse.mlp", mixed)
}

/// Three `[batch, latent]` domain latents → `[batch, 3·latent]`.
pub fn fuse(g: &mut Graph, p: &ParamStore, cfg: &ModelConfig, latents: [NodeId; 3]) -> Result<NodeId> {
    let batch = g.value(latents[0]).shape()[0];
    let t = fuse_tokens(g, p, cfg, latents)?;
    g.reshape(t, &[batch, cfg.fused_dim()])
}

/// `[batch, 3·latent] → [batch, 34]` through the residual backbone and head.
pub fn regress_pose(g: &mut Graph, p: &ParamStore, cfg: &ModelConfig, fused: NodeId) -> Result<NodeId> {
    let mut h = fused;
    for i in 0..cfg.blocks {
        let name = format!("backbone.{i}");
        g.set_scope(name.clone());
        h = nn::residual_block(g, p, &name, h)?;
    }
    g.set_scope("head");
    nn::mlp(g, p, "head", h)
}

pub fn midipose_forward(g: &mut Graph, p: &ParamStore, cfg: &ModelConfig, x: &DomainBatch) -> Result<NodeId> {
    let mut z = Vec::with_capacity(3);
    for d in Domain::ALL {
        let input = g.input(x.get(d).clone())?;
        z.push(encode_domain(g, p, cfg, d, input)?);
    }
    let fused = fuse(g, p, cfg, [z[0], z[1], z[2]])?;
    regress_pose(g, p, cfg, fused)
}

/// Conv-1D baseline over `[batch, subcarriers, rrus·7]`; returns `[batch, 34]`.
pub fn baseline_forward(g: &mut Graph, p: &ParamStore, cfg: &ModelConfig, x: NodeId) -> Result<NodeId> {
    let b = &cfg.baseline;
    let s = g.value(x).shape().to_vec();
    if s.len() != 3 || s[1] != cfg.subcarriers || s[2] != cfg.rrus * N_FEATURES {
        return Err(Error::shape(
            "baseline_forward",
            format!("input {s:?}, expected [_, {}, {}]", cfg.subcarriers, cfg.rrus * N_FEATURES),
        ));
    }
    let batch = s[0];
    let mut h = x;
    for i in 0..b.conv_channels.len() {
        let name = format!("base.conv{i}");
        g.set_scope(name.clone());
        h = nn::conv1d(g, p, &name, h, b.kernel, b.stride, b.kernel / 2)?;
        h = g.relu(h)?;
    }
    let hs = g.value(h).shape().to_vec();
    let (len, ch) = (hs[1], hs[2]);
    h = g.reshape(h, &[batch * len, ch])?;
    for i in 0..b.res_blocks {
        let name = format!("base.res{i}");
        g.set_scope(name.clone());
        h = nn::residual_block(g, p, &name, h)?;
    }
    h = g.reshape(h, &[batch, len, ch])?;
    g.set_scope("base.head");
    let pooled = g.mean_axis1(h)?;
    nn::linear(g, p, "base.head", pooled)
}

/// Coordinate mean squared error.
pub fn pose_loss(g: &mut Graph, pred: NodeId, target: NodeId) -> Result<NodeId> {
    g.set_scope("loss");
    g.mse(pred, target)
}
