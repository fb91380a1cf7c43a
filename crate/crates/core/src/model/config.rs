use crate::csi::{N_FEATURES, N_KEYPOINTS, N_RRUS, N_SUBCARRIERS};
use crate::error::{Error, Result};
use crate::features::Domain;

pub const OUTPUT_DIM: usize = 2 * N_KEYPOINTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    MiDiPose,
    Baseline,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::MiDiPose => "midipose",
            ModelKind::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "midipose" => Ok(ModelKind::MiDiPose),
            "baseline" | "metafi" => Ok(ModelKind::Baseline),
            _ => Err(Error::invalid(format!("unknown model kind {s:?}"))),
        }
    }

    fn code(self) -> f64 {
        match self {
            ModelKind::MiDiPose => 0.0,
            ModelKind::Baseline => 1.0,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the three domain tokens are combined before the backbone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fusion {
    /// Multi-head self-attention, then the per-token MLP.
    Attention,
    /// Per-token MLP only; tokens are concatenated without mixing.
    Concat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    pub conv_channels: [usize; 3],
    pub kernel: usize,
    pub stride: usize,
    pub res_blocks: usize,
    pub res_width: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            conv_channels: [32, 64, 64],
            kernel: 5,
            stride: 2,
            res_blocks: 2,
            res_width: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub subcarriers: usize,
    pub rrus: usize,
    pub latent: usize,
    pub heads: usize,
    pub encoder_hidden: usize,
    pub blocks: usize,
    pub width: usize,
    pub head_hidden: usize,
    pub fusion: Fusion,
    pub baseline: BaselineConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            subcarriers: N_SUBCARRIERS,
            rrus: N_RRUS,
            latent: 128,
            heads: 4,
            encoder_hidden: 512,
            blocks: 2,
            width: 256,
            head_hidden: 256,
            fusion: Fusion::Attention,
            baseline: BaselineConfig::default(),
        }
    }
}

impl ModelConfig {
    /// A reduced grid for gradient checks; same topology as the default.
    pub fn tiny() -> Self {
        Self {
            subcarriers: 8,
            rrus: 3,
            latent: 8,
            heads: 2,
            encoder_hidden: 6,
            blocks: 2,
            width: 5,
            head_hidden: 7,
            fusion: Fusion::Attention,
            baseline: BaselineConfig {
                conv_channels: [4, 5, 6],
                kernel: 5,
                stride: 2,
                res_blocks: 2,
                res_width: 3,
            },
        }
    }

    pub fn cells(&self) -> usize {
        self.subcarriers * self.rrus
    }

    pub fn row_len(&self) -> usize {
        self.cells() * N_FEATURES
    }

    pub fn input_dim(&self, d: Domain) -> usize {
        d.input_dim(self.cells())
    }

    pub fn fused_dim(&self) -> usize {
        3 * self.latent
    }

    pub fn validate(&self) -> Result<()> {
        let b = &self.baseline;
        let dims = [
            self.subcarriers,
            self.rrus,
            self.latent,
            self.heads,
            self.encoder_hidden,
            self.width,
            self.head_hidden,
            b.kernel,
            b.stride,
            b.res_width,
        ];
        if dims.contains(&0) || b.conv_channels.contains(&0) {
            return Err(Error::invalid("model dimensions must be positive"));
        }
        if self.latent % self.heads != 0 {
            return Err(Error::invalid(format!(
                "latent dim {} not divisible by {} heads",
                self.latent, self.heads
            )));
        }
        Ok(())
    }

    pub(crate) fn encode(&self, kind: ModelKind) -> Vec<f64> {
        let b = &self.baseline;
        let fusion = match self.fusion {
            Fusion::Attention => 0,
            Fusion::Concat => 1,
        };
        let ints = [
            self.subcarriers,
            self.rrus,
            self.latent,
            self.heads,
            self.encoder_hidden,
            self.blocks,
            self.width,
            self.head_hidden,
            fusion,
            b.conv_channels[0],
            b.conv_channels[1],
            b.conv_channels[2],
            b.kernel,
            b.stride,
            b.res_blocks,
            b.res_width,
        ];
        std::iter::once(kind.code())
            .chain(ints.iter().map(|&v| v as f64))
            .collect()
    }

    pub(crate) fn decode(v: &[f64]) -> Result<(ModelKind, Self)> {
        if v.len() != 17 || v.iter().any(|x| x.fract() != 0.0 || *x < 0.0 || *x > 1e7) {
            return Err(Error::Malformed("bad model config record".into()));
        }
        let u = |i: usize| v[i] as usize;
        let kind = match u(0) {
            0 => ModelKind::MiDiPose,
            1 => ModelKind::Baseline,
            k => return Err(Error::Malformed(format!("model kind code {k}"))),
        };
        let fusion = match u(9) {
            0 => Fusion::Attention,
            1 => Fusion::Concat,
            f => return Err(Error::Malformed(format!("fusion code {f}"))),
        };
        let cfg = Self {
            subcarriers: u(1),
            rrus: u(2),
            latent: u(3),
            heads: u(4),
            encoder_hidden: u(5),
            blocks: u(6),
            width: u(7),
            head_hidden: u(8),
            fusion,
            baseline: BaselineConfig {
                conv_channels: [u(10), u(11), u(12)],
                kernel: u(13),
                stride: u(14),
                res_blocks: u(15),
                res_width: u(16),
            },
        };
        cfg.validate()?;
        Ok((kind, cfg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub momentum: f64,
    pub lr_factor: f64,
    pub lr_period: usize,
    pub seed: u64,
    pub norm: super::NormMode,
    /// Regress per-coordinate z-scores of the targets instead of raw
    /// coordinates.
    pub standardize_targets: bool,
    /// Multiplies the normalized inputs; folded into the fitted std.
    pub input_scale: f64,
    /// L2 penalty on weight matrices; zero disables it.
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch: 64,
            epochs: 100,
            base_lr: 0.008,
            momentum: 0.9,
            lr_factor: 0.5,
            lr_period: 10,
            seed: 0,
            norm: super::NormMode::PerElement,
            standardize_targets: true,
            input_scale: 0.5,
            weight_decay: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.epochs == 0 || self.lr_period == 0 {
            return Err(Error::invalid("batch, epochs and lr period must be positive"));
        }
        let reals = [self.base_lr, self.lr_factor, self.input_scale];
        if reals.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("learning rate, decay factor and input scale must be positive"));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        Ok(())
    }
}
