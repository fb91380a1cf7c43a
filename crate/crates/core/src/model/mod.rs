//! The multi-domain fusion pose regressor, the convolutional baseline, and
//! their training loop.

mod config;
pub mod net;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{BaselineConfig, Fusion, ModelConfig, ModelKind, TrainConfig, OUTPUT_DIM};
pub use net::{
    baseline_forward, baseline_input, encode_domain, fuse, fuse_tokens, init_params, midipose_forward,
    pose_loss, regress_pose, split_domains, DomainBatch,
};

use crate::autodiff::{self, Graph, NodeId, ParamStore, SgdMomentum, Tensor};
use crate::csi::{Pose2D, N_FEATURES};
use crate::error::{Error, Result};

/// Which statistics the input z-score uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// One mean/std per feature channel, pooled over subcarriers and RRUs.
    PerChannel,
    /// One mean/std per input element.
    PerElement,
}

/// Input z-score statistics fitted on training rows. `mean` and `std` have
/// either one entry per channel (broadcast over cells) or one per element.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Default for Normalizer {
    fn default() -> Self {
        Self {
            mean: vec![0.0; N_FEATURES],
            std: vec![1.0; N_FEATURES],
        }
    }
}

impl Normalizer {
    /// Population statistics; groups with (near) zero spread keep unit scale.
    pub fn fit(rows: &[&[f64]], mode: NormMode) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyDataset)?;
        let (len, group): (usize, fn(usize) -> usize) = match mode {
            NormMode::PerChannel => (N_FEATURES, |i| i % N_FEATURES),
            NormMode::PerElement => (first.len(), |i| i),
        };
        let mut sum = vec![0.0; len];
        let mut count = vec![0usize; len];
        for r in rows {
            for (i, v) in r.iter().enumerate() {
                sum[group(i)] += v;
                count[group(i)] += 1;
            }
        }
        let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, c)| s / *c as f64).collect();
        let mut sq = vec![0.0; len];
        for r in rows {
            for (i, v) in r.iter().enumerate() {
                sq[group(i)] += (v - mean[group(i)]).powi(2);
            }
        }
        let std = sq
            .iter()
            .zip(&count)
            .map(|(s, c)| {
                let sd = (s / *c as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    /// Identity statistics over `len` elements.
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            std: vec![1.0; len],
        }
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        let n = self.mean.len();
        z.iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % n] + self.mean[i % n])
            .collect()
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        let n = self.mean.len();
        row.iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % n]) / self.std[i % n])
            .collect()
    }

    fn validate(&self, allowed: &[usize]) -> Result<()> {
        let n = self.mean.len();
        if n != self.std.len() || !allowed.contains(&n) {
            return Err(Error::Malformed(format!(
                "normalizer with {} means and {} stds, expected one of {allowed:?}",
                n,
                self.std.len()
            )));
        }
        if self.std.iter().any(|s| !(*s > 0.0 && s.is_finite())) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Malformed("normalizer statistics must be finite with positive std".into()));
        }
        Ok(())
    }
}

/// A model kind with its configuration, weights and input normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub config: ModelConfig,
    pub params: ParamStore,
    /// Input feature z-score.
    pub norm: Normalizer,
    /// Output coordinate z-score; the network regresses standardized
    /// coordinates and `predict` maps them back.
    pub target: Normalizer,
}

const META_CONFIG: &str = "meta.config";
const META_MEAN: &str = "meta.norm.mean";
const META_STD: &str = "meta.norm.std";
const META_TARGET_MEAN: &str = "meta.target.mean";
const META_TARGET_STD: &str = "meta.target.std";

impl Model {
    pub fn init(kind: ModelKind, config: ModelConfig, seed: u64) -> Result<Self> {
        Ok(Self {
            kind,
            params: init_params(kind, &config, seed)?,
            config,
            norm: Normalizer::default(),
            target: Normalizer::identity(OUTPUT_DIM),
        })
    }

    /// Builds the forward graph on already normalized rows; returns `[batch, 34]`.
    pub fn forward_normalized(&self, g: &mut Graph, rows: &[&[f64]]) -> Result<NodeId> {
        forward_rows(g, &self.params, self.kind, &self.config, rows)
    }

    pub fn predict(&self, rows: &[&[f64]]) -> Result<Vec<Pose2D>> {
        let mut out = Vec::with_capacity(rows.len());
        for chunk in rows.chunks(256) {
            let normed: Vec<Vec<f64>> = chunk.iter().map(|r| self.norm.apply(r)).collect();
            let refs: Vec<&[f64]> = normed.iter().map(|r| r.as_slice()).collect();
            let mut g = Graph::new();
            let y = self.forward_normalized(&mut g, &refs)?;
            for row in g.value(y).data().chunks_exact(OUTPUT_DIM) {
                out.push(Pose2D::from_flat(&self.target.invert(row))?);
            }
        }
        Ok(out)
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<Pose2D> {
        Ok(self.predict(&[row])?.remove(0))
    }

    /// Weights plus `meta.*` entries holding the config and normalization.
    pub fn to_store(&self) -> ParamStore {
        let mut s = self.params.clone();
        let cfg = self.config.encode(self.kind);
        let n = cfg.len();
        s.insert(META_CONFIG, Tensor::new(&[n], cfg).expect("config record"));
        let n = self.norm.mean.len();
        s.insert(META_MEAN, Tensor::new(&[n], self.norm.mean.clone()).expect("mean"));
        s.insert(META_STD, Tensor::new(&[n], self.norm.std.clone()).expect("std"));
        s.insert(META_TARGET_MEAN, Tensor::new(&[OUTPUT_DIM], self.target.mean.clone()).expect("mean"));
        s.insert(META_TARGET_STD, Tensor::new(&[OUTPUT_DIM], self.target.std.clone()).expect("std"));
        s
    }

    /// Rebuilds a model, checking every weight name and shape against the
    /// recorded configuration.
    pub fn from_store(mut store: ParamStore) -> Result<Self> {
        let mut take = |name: &str| {
            store
                .remove(name)
                .ok_or_else(|| Error::Malformed(format!("checkpoint lacks {name}")))
        };
        let cfg = take(META_CONFIG)?;
        let mean = take(META_MEAN)?;
        let std = take(META_STD)?;
        let target = Normalizer {
            mean: take(META_TARGET_MEAN)?.into_data(),
            std: take(META_TARGET_STD)?.into_data(),
        };
        target.validate(&[OUTPUT_DIM])?;
        let (kind, config) = ModelConfig::decode(cfg.data())?;
        let norm = Normalizer {
            mean: mean.into_data(),
            std: std.into_data(),
        };
        norm.validate(&[N_FEATURES, config.row_len()])?;
        let expected = init_params(kind, &config, 0)?;
        for (name, t) in expected.iter() {
            let got = store.get(name).map_err(|_| {
                Error::Malformed(format!("checkpoint for {kind} lacks parameter {name}"))
            })?;
            if got.shape() != t.shape() {
                return Err(Error::shape(
                    "Model::from_store",
                    format!("{name}: checkpoint {:?}, {kind} expects {:?}", got.shape(), t.shape()),
                ));
            }
        }
        if let Some(extra) = store.names().find(|n| !expected.contains(n)) {
            return Err(Error::Malformed(format!("unexpected parameter {extra} for {kind}")));
        }
        Ok(Self {
            kind,
            config,
            params: store,
            norm,
            target,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        autodiff::save_checkpoint(&self.to_store(), path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_store(autodiff::load_checkpoint(path)?)
    }

    /// Rounds every weight to `f32`, the checkpoint precision.
    pub fn quantize(&mut self) {
        for (_, t) in self.params.iter_mut() {
            for v in t.data_mut() {
                *v = *v as f32 as f64;
            }
        }
        for n in [&mut self.norm, &mut self.target] {
            for v in n.mean.iter_mut().chain(n.std.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        autodiff::encode_checkpoint(&self.to_store())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_store(autodiff::decode_checkpoint(bytes)?)
    }
}

fn forward_rows(
    g: &mut Graph,
    params: &ParamStore,
    kind: ModelKind,
    cfg: &ModelConfig,
    rows: &[&[f64]],
) -> Result<NodeId> {
    match kind {
        ModelKind::MiDiPose => {
            let x = split_domains(rows, cfg)?;
            midipose_forward(g, params, cfg, &x)
        }
        ModelKind::Baseline => {
            let x = g.input(baseline_input(rows, cfg)?)?;
            baseline_forward(g, params, cfg, x)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub history: Vec<EpochLog>,
}

impl TrainOutcome {
    /// One `epoch lr mean_loss` line per epoch.
    pub fn loss_log(&self) -> String {
        self.history
            .iter()
            .map(|e| format!("{} {:.6} {:.12e}\n", e.epoch, e.lr, e.mean_loss))
            .collect()
    }
}

pub fn train(
    rows: &[&[f64]],
    targets: &[Pose2D],
    kind: ModelKind,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    train_with_progress(rows, targets, kind, model_cfg, cfg, |_| {})
}

/// Mini-batch SGD with momentum on coordinate MSE. Input and target
/// statistics come from `rows` and `targets`, which should be the training
/// split only.
pub fn train_with_progress(
    rows: &[&[f64]],
    targets: &[Pose2D],
    kind: ModelKind,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if rows.len() != targets.len() {
        return Err(Error::shape(
            "train",
            format!("{} feature rows vs {} targets", rows.len(), targets.len()),
        ));
    }
    let mut model = Model::init(kind, *model_cfg, cfg.seed)?;
    model.norm = Normalizer::fit(rows, cfg.norm)?;
    for s in &mut model.norm.std {
        *s /= cfg.input_scale;
    }
    let normed: Vec<Vec<f64>> = rows.iter().map(|r| model.norm.apply(r)).collect();
    let flat: Vec<[f64; OUTPUT_DIM]> = targets.iter().map(Pose2D::to_flat).collect();
    if cfg.standardize_targets {
        let refs: Vec<&[f64]> = flat.iter().map(|t| t.as_slice()).collect();
        model.target = Normalizer::fit(&refs, NormMode::PerElement)?;
    }
    let flat_targets: Vec<Vec<f64>> = flat.iter().map(|t| model.target.apply(t)).collect();

    let schedule = autodiff::MultiStepSchedule {
        base_lr: cfg.base_lr,
        factor: cfg.lr_factor,
        period: cfg.lr_period,
    };
    let mut opt = SgdMomentum::new(cfg.base_lr, cfg.momentum);
    opt.weight_decay = cfg.weight_decay;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        opt.lr = schedule.lr(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (bi, idx) in order.chunks(cfg.batch).enumerate() {
            let batch_rows: Vec<&[f64]> = idx.iter().map(|&i| normed[i].as_slice()).collect();
            let target: Vec<f64> = idx.iter().flat_map(|&i| flat_targets[i].iter().copied()).collect();
            let mut g = Graph::new();
            let step = (|| {
                let pred = forward_rows(&mut g, &model.params, kind, model_cfg, &batch_rows)?;
                let t = g.input(Tensor::new(&[idx.len(), OUTPUT_DIM], target)?)?;
                pose_loss(&mut g, pred, t)
            })();
            let loss = match step {
                Ok(l) => l,
                Err(Error::NonFinite { .. }) => return Err(Error::NonFiniteLoss { epoch, batch: bi }),
                Err(e) => return Err(e),
            };
            let lv = g.value(loss).item();
            total += lv * idx.len() as f64;
            let grads = g.backward(loss)?.into_param_grads(&model.params);
            opt.step(&mut model.params, &grads)
                .map_err(|e| match e {
                    Error::NonFinite { .. } => Error::NonFiniteLoss { epoch, batch: bi },
                    e => e,
                })?;
        }
        let log = EpochLog {
            epoch,
            lr: opt.lr,
            mean_loss: total / rows.len() as f64,
        };
        on_epoch(&log);
        history.push(log);
    }
    model.quantize();
    Ok(TrainOutcome { model, history })
}
