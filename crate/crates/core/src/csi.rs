//! Domain types shared across the pipeline: channel snapshots, 2D poses,
//! motion labels and the extracted feature tensor.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const N_SUBCARRIERS: usize = 544;
pub const N_RRUS: usize = 3;
pub const N_FEATURES: usize = 7;
pub const N_KEYPOINTS: usize = 17;

/// Length of one flattened feature row, `[subcarrier][rru][channel]`.
pub const FEATURE_ROW_LEN: usize = N_SUBCARRIERS * N_RRUS * N_FEATURES;

/// COCO-17 keypoint names in output order.
pub const KEYPOINT_NAMES: [&str; N_KEYPOINTS] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

pub mod kp {
    pub const NOSE: usize = 0;
    pub const LEFT_EYE: usize = 1;
    pub const RIGHT_EYE: usize = 2;
    pub const LEFT_EAR: usize = 3;
    pub const RIGHT_EAR: usize = 4;
    pub const LEFT_SHOULDER: usize = 5;
    pub const RIGHT_SHOULDER: usize = 6;
    pub const LEFT_ELBOW: usize = 7;
    pub const RIGHT_ELBOW: usize = 8;
    pub const LEFT_WRIST: usize = 9;
    pub const RIGHT_WRIST: usize = 10;
    pub const LEFT_HIP: usize = 11;
    pub const RIGHT_HIP: usize = 12;
    pub const LEFT_KNEE: usize = 13;
    pub const RIGHT_KNEE: usize = 14;
    pub const LEFT_ANKLE: usize = 15;
    pub const RIGHT_ANKLE: usize = 16;
}

/// One timestamped complex channel snapshot, stored `[subcarrier][rru]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsiFrame {
    timestamp: f64,
    h: Vec<Complex64>,
}

impl CsiFrame {
    pub fn new(timestamp: f64, h: Vec<Complex64>) -> Result<Self> {
        if h.len() != N_SUBCARRIERS * N_RRUS {
            return Err(Error::shape(
                "CsiFrame::new",
                format!("expected {} entries, got {}", N_SUBCARRIERS * N_RRUS, h.len()),
            ));
        }
        if !timestamp.is_finite() {
            return Err(Error::invalid("frame timestamp must be finite"));
        }
        if h.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("frame contains non-finite channel gain"));
        }
        Ok(Self { timestamp, h })
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn get(&self, subcarrier: usize, rru: usize) -> Complex64 {
        self.h[subcarrier * N_RRUS + rru]
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.h
    }
}

/// Amplitude `|h|` per `[subcarrier][rru]`, flattened row-major.
pub fn amplitude(frame: &CsiFrame) -> Vec<f64> {
    frame.h.iter().map(|c| c.re.hypot(c.im)).collect()
}

/// Two-argument arctangent phase per `[subcarrier][rru]`, in `(-π, π]`.
pub fn raw_phase(frame: &CsiFrame) -> Result<Vec<f64>> {
    frame
        .h
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if c.re == 0.0 && c.im == 0.0 {
                return Err(Error::UndefinedPhase {
                    subcarrier: i / N_RRUS,
                    rru: i % N_RRUS,
                });
            }
            let p = c.im.atan2(c.re);
            // atan2(-0.0, x<0) returns -π; fold onto the closed end.
            Ok(if p <= -PI { PI } else { p })
        })
        .collect()
}

/// 17 keypoints in normalized scene coordinates, y pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose2D {
    pub keypoints: [[f64; 2]; N_KEYPOINTS],
}

impl Pose2D {
    pub fn new(keypoints: [[f64; 2]; N_KEYPOINTS]) -> Result<Self> {
        if keypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("pose contains non-finite coordinate"));
        }
        Ok(Self { keypoints })
    }

    pub fn origin() -> Self {
        Self {
            keypoints: [[0.0; 2]; N_KEYPOINTS],
        }
    }

    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 2 * N_KEYPOINTS {
            return Err(Error::shape(
                "Pose2D::from_flat",
                format!("expected {} values, got {}", 2 * N_KEYPOINTS, values.len()),
            ));
        }
        let mut keypoints = [[0.0; 2]; N_KEYPOINTS];
        for (k, xy) in keypoints.iter_mut().enumerate() {
            *xy = [values[2 * k], values[2 * k + 1]];
        }
        Self::new(keypoints)
    }

    pub fn to_flat(&self) -> [f64; 2 * N_KEYPOINTS] {
        let mut out = [0.0; 2 * N_KEYPOINTS];
        for (k, xy) in self.keypoints.iter().enumerate() {
            out[2 * k] = xy[0];
            out[2 * k + 1] = xy[1];
        }
        out
    }

    pub fn map(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut keypoints = self.keypoints;
        for xy in keypoints.iter_mut() {
            *xy = f(*xy);
        }
        Self { keypoints }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MotionKind {
    Marktime,
    Lunge,
    RiseHand,
    Walk,
    Squat,
}

impl MotionKind {
    pub const ALL: [MotionKind; 5] = [
        MotionKind::Marktime,
        MotionKind::Lunge,
        MotionKind::RiseHand,
        MotionKind::Walk,
        MotionKind::Squat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MotionKind::Marktime => "marktime",
            MotionKind::Lunge => "lunge",
            MotionKind::RiseHand => "risehand",
            MotionKind::Walk => "walk",
            MotionKind::Squat => "squat",
        }
    }

    pub fn code(self) -> u32 {
        match self {
            MotionKind::Marktime => 0,
            MotionKind::Lunge => 1,
            MotionKind::RiseHand => 2,
            MotionKind::Walk => 3,
            MotionKind::Squat => 4,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.code() == code)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|m| m.name() == s)
    }
}

impl fmt::Display for MotionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A named static instant within a motion (left/right variants where the
/// motion has them).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateTag {
    Marktime1,
    Marktime2,
    Lunge1,
    Lunge2,
    RiseHand1,
    RiseHand2,
    Walk,
    Squat,
}

impl StateTag {
    pub const ALL: [StateTag; 8] = [
        StateTag::Marktime1,
        StateTag::Marktime2,
        StateTag::Lunge1,
        StateTag::Lunge2,
        StateTag::RiseHand1,
        StateTag::RiseHand2,
        StateTag::Walk,
        StateTag::Squat,
    ];

    pub fn motion(self) -> MotionKind {
        match self {
            StateTag::Marktime1 | StateTag::Marktime2 => MotionKind::Marktime,
            StateTag::Lunge1 | StateTag::Lunge2 => MotionKind::Lunge,
            StateTag::RiseHand1 | StateTag::RiseHand2 => MotionKind::RiseHand,
            StateTag::Walk => MotionKind::Walk,
            StateTag::Squat => MotionKind::Squat,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StateTag::Marktime1 => "marktime1",
            StateTag::Marktime2 => "marktime2",
            StateTag::Lunge1 => "lunge1",
            StateTag::Lunge2 => "lunge2",
            StateTag::RiseHand1 => "risehand1",
            StateTag::RiseHand2 => "risehand2",
            StateTag::Walk => "walk",
            StateTag::Squat => "squat",
        }
    }

    pub fn code(self) -> u32 {
        StateTag::ALL.iter().position(|t| *t == self).unwrap() as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        StateTag::ALL.get(code as usize).copied()
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|t| t.name() == s)
    }
}

impl fmt::Display for StateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub pose: Pose2D,
    pub timestamp: f64,
    pub motion: MotionKind,
    pub state_tag: Option<StateTag>,
}

impl LabeledFrame {
    pub fn new(
        pose: Pose2D,
        timestamp: f64,
        motion: MotionKind,
        state_tag: Option<StateTag>,
    ) -> Result<Self> {
        if let Some(tag) = state_tag {
            if tag.motion() != motion {
                return Err(Error::invalid(format!(
                    "state tag {tag} is inconsistent with motion {motion}"
                )));
            }
        }
        if !timestamp.is_finite() {
            return Err(Error::invalid("label timestamp must be finite"));
        }
        Ok(Self {
            pose,
            timestamp,
            motion,
            state_tag,
        })
    }
}

/// Channel index within a feature row.
pub mod channel {
    pub const AMPLITUDE: usize = 0;
    pub const NORM_STD: usize = 1;
    pub const MAD: usize = 2;
    pub const IQR: usize = 3;
    pub const PHASE: usize = 4;
    pub const PHASE_DIFF: usize = 5;
    pub const DOPPLER: usize = 6;
}

/// `n × 544 × 3 × 7` features, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    n: usize,
    data: Vec<f64>,
}

impl FeatureTensor {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * FEATURE_ROW_LEN {
            return Err(Error::shape(
                "FeatureTensor::new",
                format!("expected {} values, got {}", n * FEATURE_ROW_LEN, data.len()),
            ));
        }
        Ok(Self { n, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, N_SUBCARRIERS, N_RRUS, N_FEATURES]
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * FEATURE_ROW_LEN..(i + 1) * FEATURE_ROW_LEN]
    }

    pub fn get(&self, frame: usize, subcarrier: usize, rru: usize, ch: usize) -> f64 {
        self.data[((frame * N_SUBCARRIERS + subcarrier) * N_RRUS + rru) * N_FEATURES + ch]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}
