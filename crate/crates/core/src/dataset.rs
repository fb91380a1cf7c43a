//! The `MDP1` dataset container.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic "MDP1" | version u32 | n_frames u32 | n_subcarriers u32 | n_rrus u32
//! | n_labels u32 | n_keypoints u32 | has_features u32
//! frames:   n_frames × [timestamp f32, (re f32, im f32) × n_subcarriers × n_rrus]
//! labels:   n_labels × [timestamp f32, motion f32, state_tag f32 (-1 = none), (x f32, y f32) × n_keypoints]
//! features: (when has_features = 1) n u32 | n_channels u32 | n × 544 × 3 × 7 f32
//! ```
//!
//! Values are stored as `f32`; anything f32-representable round-trips exactly.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::csi::{
    CsiFrame, FeatureTensor, LabeledFrame, MotionKind, Pose2D, StateTag, N_FEATURES, N_KEYPOINTS,
    N_RRUS, N_SUBCARRIERS,
};
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const DATASET_MAGIC: [u8; 4] = *b"MDP1";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub frames: Vec<CsiFrame>,
    pub labels: Vec<LabeledFrame>,
    pub features: Option<FeatureTensor>,
}

pub fn write_dataset(
    frames: &[CsiFrame],
    labels: &[LabeledFrame],
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_dataset(frames, labels, None)?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn write_dataset_with_features(
    frames: &[CsiFrame],
    labels: &[LabeledFrame],
    features: &FeatureTensor,
    path: impl AsRef<Path>,
) -> Result<()> {
    let bytes = encode_dataset(frames, labels, Some(features))?;
    fs::write(path, bytes)?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let bytes = fs::read(path)?;
    decode_dataset(&bytes)
}

pub fn encode_dataset(
    frames: &[CsiFrame],
    labels: &[LabeledFrame],
    features: Option<&FeatureTensor>,
) -> Result<Vec<u8>> {
    if frames.is_empty() || labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let frame_len = 1 + 2 * N_SUBCARRIERS * N_RRUS;
    let label_len = 3 + 2 * N_KEYPOINTS;
    let feat_len = features.map_or(0, |f| 8 + 4 * f.data().len());
    let mut w = ByteWriter::with_capacity(
        32 + 4 * (frames.len() * frame_len + labels.len() * label_len) + feat_len,
    );
    w.bytes(&DATASET_MAGIC);
    w.u32(DATASET_VERSION);
    w.u32(len_u32(frames.len())?);
    w.u32(N_SUBCARRIERS as u32);
    w.u32(N_RRUS as u32);
    w.u32(len_u32(labels.len())?);
    w.u32(N_KEYPOINTS as u32);
    w.u32(features.is_some() as u32);

    for f in frames {
        w.f32(f.timestamp() as f32);
        for c in f.gains() {
            w.f32(c.re as f32);
            w.f32(c.im as f32);
        }
    }
    for l in labels {
        w.f32(l.timestamp as f32);
        w.f32(l.motion.code() as f32);
        w.f32(l.state_tag.map_or(-1.0, |t| t.code() as f32));
        for v in l.pose.to_flat() {
            w.f32(v as f32);
        }
    }
    if let Some(feat) = features {
        w.u32(len_u32(feat.len())?);
        w.u32(N_FEATURES as u32);
        for &v in feat.data() {
            w.f32(v as f32);
        }
    }
    Ok(w.into_inner())
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut r = ByteReader::new(bytes);
    let magic = r.magic()?;
    if magic != DATASET_MAGIC {
        return Err(Error::BadMagic {
            expected: DATASET_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != DATASET_VERSION {
        return Err(Error::BadVersion(version));
    }
    let n_frames = r.u32()? as usize;
    let n_sub = r.u32()? as usize;
    let n_rru = r.u32()? as usize;
    let n_labels = r.u32()? as usize;
    let n_kp = r.u32()? as usize;
    let has_features = r.u32()?;
    if n_sub != N_SUBCARRIERS || n_rru != N_RRUS || n_kp != N_KEYPOINTS {
        return Err(Error::Malformed(format!(
            "unsupported geometry {n_sub} subcarriers × {n_rru} rrus, {n_kp} keypoints"
        )));
    }
    if n_frames == 0 || n_labels == 0 {
        return Err(Error::EmptyDataset);
    }
    if has_features > 1 {
        return Err(Error::Malformed(format!("bad feature flag {has_features}")));
    }
    let frame_bytes = 4 * (1 + 2 * n_sub * n_rru);
    r.expect_remaining(n_frames * frame_bytes, "frame records")?;

    let mut frames = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let ts = r.f32()? as f64;
        let mut h = Vec::with_capacity(n_sub * n_rru);
        for _ in 0..n_sub * n_rru {
            let re = r.f32()? as f64;
            let im = r.f32()? as f64;
            h.push(Complex64::new(re, im));
        }
        if let Some(prev) = frames.last().map(CsiFrame::timestamp) {
            if ts <= prev {
                return Err(Error::NonMonotonic {
                    what: "frame",
                    index: i,
                });
            }
        }
        frames.push(CsiFrame::new(ts, h)?);
    }

    let mut labels: Vec<LabeledFrame> = Vec::with_capacity(n_labels);
    for i in 0..n_labels {
        let ts = r.f32()? as f64;
        let motion_code = r.f32()?;
        let tag_code = r.f32()?;
        let mut flat = [0.0; 2 * N_KEYPOINTS];
        for v in flat.iter_mut() {
            *v = r.f32()? as f64;
        }
        let motion = code_to_u32(motion_code)
            .and_then(MotionKind::from_code)
            .ok_or_else(|| Error::Malformed(format!("bad motion code {motion_code} at label {i}")))?;
        let tag = if tag_code == -1.0 {
            None
        } else {
            Some(
                code_to_u32(tag_code)
                    .and_then(StateTag::from_code)
                    .ok_or_else(|| {
                        Error::Malformed(format!("bad state tag code {tag_code} at label {i}"))
                    })?,
            )
        };
        if let Some(prev) = labels.last() {
            if ts <= prev.timestamp {
                return Err(Error::NonMonotonic {
                    what: "label",
                    index: i,
                });
            }
        }
        labels.push(LabeledFrame::new(Pose2D::from_flat(&flat)?, ts, motion, tag)?);
    }

    let features = if has_features == 1 {
        let n = r.u32()? as usize;
        let channels = r.u32()? as usize;
        if channels != N_FEATURES {
            return Err(Error::Malformed(format!("feature section has {channels} channels")));
        }
        let count = n * N_SUBCARRIERS * N_RRUS * N_FEATURES;
        r.expect_remaining(4 * count, "feature section")?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(r.f32()? as f64);
        }
        Some(FeatureTensor::new(n, data)?)
    } else {
        None
    };

    if r.remaining() != 0 {
        return Err(Error::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    Ok(Dataset {
        frames,
        labels,
        features,
    })
}

fn code_to_u32(v: f32) -> Option<u32> {
    (v >= 0.0 && v.fract() == 0.0 && v < 1e6).then_some(v as u32)
}

fn len_u32(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::invalid(format!("count {n} exceeds u32")))
}
