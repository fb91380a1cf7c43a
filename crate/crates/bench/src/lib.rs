//! Shared fixtures for the benchmarks.

use midipose::synth::{gen_motion, simulate_csi, SceneLayout};
use midipose::{extract_features, CsiFrame, FeatureTensor, MotionKind, WindowConfig};

/// `n` noisy CSI frames of a squat.
pub fn frames(n: usize) -> Vec<CsiFrame> {
    let layout = SceneLayout::default();
    let script = gen_motion(MotionKind::Squat, n as f64 / layout.csi_rate, &layout).expect("valid motion");
    simulate_csi(&script, 1).expect("valid script")
}

pub fn features(n: usize) -> FeatureTensor {
    extract_features(&frames(n), &WindowConfig::default()).expect("enough frames")
}
