//! Dataset → aligned, split, featurized training samples.

use crate::alignment::{align_nearest, split, AlignedSample, Split, SplitSpec};
use crate::csi::{CsiFrame, FeatureTensor, LabeledFrame, Pose2D};
use crate::error::{Error, Result};
use crate::eval::EvalSample;
use crate::features::{extract_features, WindowConfig};

/// Every label paired with the features of its nearest CSI frame.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub features: FeatureTensor,
    pub labels: Vec<LabeledFrame>,
    pub pairs: Vec<AlignedSample>,
    pub split: Split,
}

pub fn prepare(
    frames: &[CsiFrame],
    labels: &[LabeledFrame],
    window: &WindowConfig,
    spec: &SplitSpec,
) -> Result<Prepared> {
    if frames.is_empty() || labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let label_ts: Vec<f64> = labels.iter().map(|l| l.timestamp).collect();
    let csi_ts: Vec<f64> = frames.iter().map(|f| f.timestamp()).collect();
    let pairs = align_nearest(&label_ts, &csi_ts)?;
    let split = split(pairs.len(), spec)?;
    let features = extract_features(frames, window)?;
    Ok(Prepared {
        features,
        labels: labels.to_vec(),
        pairs,
        split,
    })
}

impl Prepared {
    /// Feature row for aligned sample `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        self.features.row(self.pairs[i].csi_index)
    }

    pub fn pose(&self, i: usize) -> Pose2D {
        self.labels[self.pairs[i].label_index].pose
    }

    pub fn rows(&self, idx: &[usize]) -> Vec<&[f64]> {
        idx.iter().map(|&i| self.row(i)).collect()
    }

    pub fn poses(&self, idx: &[usize]) -> Vec<Pose2D> {
        idx.iter().map(|&i| self.pose(i)).collect()
    }

    pub fn eval_samples(&self, idx: &[usize]) -> Vec<EvalSample<'_>> {
        idx.iter()
            .map(|&i| {
                let l = &self.labels[self.pairs[i].label_index];
                EvalSample {
                    features: self.row(i),
                    gt: l.pose,
                    motion: l.motion,
                    state_tag: l.state_tag,
                }
            })
            .collect()
    }
}
