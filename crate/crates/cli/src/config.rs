use std::path::PathBuf;

use midipose::alignment::SplitMode;
use midipose::model::{Fusion, ModelConfig, ModelKind, NormMode, TrainConfig};
use midipose::synth::SceneLayout;
use midipose::{MotionKind, SplitSpec, WindowConfig};
use serde::Deserialize;
use toml::{Table, Value};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scene: SceneSection,
    pub features: FeatureSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub paths: PathSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scene: SceneSection::default(),
            features: FeatureSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            paths: PathSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSection {
    pub motions: Vec<String>,
    /// Seconds per motion.
    pub duration: f64,
    pub seed: u64,
    /// Negative disables noise.
    pub snr_db: f64,
    pub jitter: f64,
}

impl Default for SceneSection {
    fn default() -> Self {
        Self {
            motions: MotionKind::ALL.iter().map(|m| m.name().to_string()).collect(),
            duration: 16.0,
            seed: 7,
            snr_db: 25.0,
            jitter: 0.002,
        }
    }
}

impl SceneSection {
    pub fn kinds(&self) -> Result<Vec<MotionKind>, String> {
        self.motions
            .iter()
            .map(|m| MotionKind::parse(m).ok_or_else(|| format!("scene.motions: unknown motion {m:?}")))
            .collect()
    }

    pub fn layout(&self) -> SceneLayout {
        SceneLayout {
            snr_db: (self.snr_db >= 0.0).then_some(self.snr_db),
            jitter: self.jitter,
            ..SceneLayout::default()
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureSection {
    pub window: usize,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            window: WindowConfig::default().window_len,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub model: String,
    pub batch: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub lr_factor: f64,
    pub lr_period: usize,
    pub seed: u64,
    /// `random` or `temporal`.
    pub split: String,
    /// `attention` or `concat`.
    pub fusion: String,
    /// `element` or `channel`.
    pub norm: String,
    pub input_scale: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            model: ModelKind::MiDiPose.name().into(),
            batch: t.batch,
            epochs: t.epochs,
            lr: t.base_lr,
            momentum: t.momentum,
            lr_factor: t.lr_factor,
            lr_period: t.lr_period,
            seed: 7,
            split: "random".into(),
            fusion: "attention".into(),
            norm: "element".into(),
            input_scale: t.input_scale,
        }
    }
}

impl TrainSection {
    pub fn kind(&self) -> Result<ModelKind, String> {
        ModelKind::parse(&self.model).map_err(|e| format!("train.model: {e}"))
    }

    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let norm = match self.norm.as_str() {
            "element" => NormMode::PerElement,
            "channel" => NormMode::PerChannel,
            n => return Err(format!("train.norm: expected \"element\" or \"channel\", got {n:?}")),
        };
        let cfg = TrainConfig {
            batch: self.batch,
            epochs: self.epochs,
            base_lr: self.lr,
            momentum: self.momentum,
            lr_factor: self.lr_factor,
            lr_period: self.lr_period,
            seed: self.seed,
            norm,
            input_scale: self.input_scale,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(|e| format!("train: {e}"))?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> Result<ModelConfig, String> {
        let fusion = match self.fusion.as_str() {
            "attention" => Fusion::Attention,
            "concat" => Fusion::Concat,
            f => return Err(format!("train.fusion: expected \"attention\" or \"concat\", got {f:?}")),
        };
        Ok(ModelConfig {
            fusion,
            ..ModelConfig::default()
        })
    }

    pub fn split_spec(&self) -> Result<SplitSpec, String> {
        let mode = match self.split.as_str() {
            "random" => SplitMode::Random,
            "temporal" => SplitMode::Temporal,
            s => return Err(format!("train.split: expected \"random\" or \"temporal\", got {s:?}")),
        };
        Ok(SplitSpec {
            mode,
            ..SplitSpec::with_seed(self.seed)
        })
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub thresholds: Vec<f64>,
    /// Any of `state`, `process`.
    pub slices: Vec<String>,
    /// Which split to score: `test`, `val` or `train`.
    pub split: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            thresholds: midipose::eval::PCK_THRESHOLDS.to_vec(),
            slices: vec!["state".into(), "process".into()],
            split: "test".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PathSection {
    pub dataset: PathBuf,
    pub checkpoint: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathSection {
    fn default() -> Self {
        Self {
            dataset: "data/synth.mdp1".into(),
            checkpoint: "out/midipose.mdpw".into(),
            reports: "out/reports".into(),
        }
    }
}

impl RunConfig {
    /// Parses `text`, applies `section.key=value` overrides, then checks the
    /// schema. Values are read as TOML literals, falling back to strings.
    pub fn load(text: &str, overrides: &[String]) -> Result<Self, String> {
        let mut root: Table = text.parse().map_err(|e: toml::de::Error| format!("config: {e}"))?;
        for o in overrides {
            let (key, raw) = o
                .split_once('=')
                .ok_or_else(|| format!("override {o:?} is not section.key=value"))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| format!("override key {key:?} is not section.key"))?;
            let value = parse_literal(raw.trim());
            let table = root
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .ok_or_else(|| format!("{section} is not a section"))?;
            table.insert(field.to_string(), value);
        }
        let cfg: RunConfig = Value::Table(root)
            .try_into()
            .map_err(|e: toml::de::Error| format!("config: {}", e.message()))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), String> {
        self.scene.kinds()?;
        self.train.kind()?;
        self.train.train_config()?;
        self.train.model_config()?;
        self.train.split_spec()?;
        self.window().validate().map_err(|e| format!("features: {e}"))?;
        if self.eval.thresholds.is_empty() || self.eval.thresholds.iter().any(|a| !(*a >= 0.0)) {
            return Err("eval.thresholds must be a non-empty list of non-negative numbers".into());
        }
        for s in &self.eval.slices {
            if s != "state" && s != "process" {
                return Err(format!("eval.slices: unknown slice kind {s:?}"));
            }
        }
        if !["test", "val", "train"].contains(&self.eval.split.as_str()) {
            return Err(format!("eval.split: unknown split {:?}", self.eval.split));
        }
        Ok(())
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            window_len: self.features.window,
            ..WindowConfig::default()
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.scene.seed = seed;
        self.train.seed = seed;
    }
}

fn parse_literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
