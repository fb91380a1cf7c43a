use std::f64::consts::TAU;

use midipose::csi::{amplitude, channel as ch, kp, raw_phase, N_RRUS, N_SUBCARRIERS};
use midipose::dataset::encode_dataset;
use midipose::features::{linear_fit, unwrap};
use midipose::synth::{
    self, body_scatterers, gen_motion, make_dataset, motion_pose, simulate_csi, SceneLayout, Scatterer,
    SPEED_OF_LIGHT,
};
use midipose::{align_nearest, extract_features, CsiFrame, MotionKind, StateTag, WindowConfig};
use proptest::prelude::*;

fn quiet() -> SceneLayout {
    SceneLayout {
        snr_db: None,
        ..SceneLayout::default()
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn zero_duration_is_empty_and_negative_is_rejected() {
    let layout = SceneLayout::default();
    let s = gen_motion(MotionKind::Squat, 0.0, &layout).unwrap();
    assert!(s.is_empty());
    assert!(simulate_csi(&s, 1).unwrap().is_empty());
    assert!(gen_motion(MotionKind::Squat, -1.0, &layout).is_err());
    assert!(gen_motion(MotionKind::Squat, f64::NAN, &layout).is_err());
}

#[test]
fn squat_lowers_hips_and_returns() {
    let layout = SceneLayout::default();
    let s = gen_motion(MotionKind::Squat, 3.0, &layout).unwrap();
    let hip = |i: usize| s.labels[i].pose.keypoints[kp::LEFT_HIP][1];
    let n = s.labels.len();
    let lowest = (0..n).min_by(|&a, &b| hip(a).total_cmp(&hip(b))).unwrap();
    assert!(lowest > 0 && lowest < n - 1);
    assert!(hip(lowest) < hip(0) - 0.05);
    // Descending to the bottom, then rising back.
    assert!((1..=lowest).all(|i| hip(i) <= hip(i - 1) + 1e-12));
    assert!((lowest + 1..n).all(|i| hip(i) >= hip(i - 1) - 1e-12));
    let back = motion_pose(&layout, MotionKind::Squat, 3.0);
    assert!((back.keypoints[kp::LEFT_HIP][1] - hip(0)).abs() < 1e-6);
}

#[test]
fn keypoints_stay_in_unit_square() {
    let layout = SceneLayout::default();
    for kind in MotionKind::ALL {
        let s = gen_motion(kind, kind.period(), &layout).unwrap();
        for l in &s.labels {
            for [x, y] in l.pose.keypoints {
                assert!((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y), "{kind}: ({x}, {y})");
            }
        }
    }
}

#[test]
fn motions_are_periodic() {
    let layout = SceneLayout::default();
    for kind in MotionKind::ALL {
        for i in 0..20 {
            let t = i as f64 * 0.37;
            let a = motion_pose(&layout, kind, t);
            let b = motion_pose(&layout, kind, t + kind.period());
            for (p, q) in a.keypoints.iter().zip(&b.keypoints) {
                assert!((p[0] - q[0]).abs() < 1e-6 && (p[1] - q[1]).abs() < 1e-6, "{kind} at {t}");
            }
        }
    }
}

#[test]
fn marktime_tags_alternate_at_knee_peaks() {
    let layout = SceneLayout::default();
    let s = gen_motion(MotionKind::Marktime, 10.0, &layout).unwrap();
    let mut runs: Vec<StateTag> = Vec::new();
    for l in &s.labels {
        let Some(tag) = l.state_tag else { continue };
        let [left, right] = [kp::LEFT_KNEE, kp::RIGHT_KNEE].map(|j| l.pose.keypoints[j][1]);
        match tag {
            StateTag::Marktime1 => assert!(left > right),
            StateTag::Marktime2 => assert!(right > left),
            t => panic!("foreign tag {t}"),
        }
        if runs.last() != Some(&tag) {
            runs.push(tag);
        }
    }
    assert!(runs.len() >= 8);
    assert!(runs.windows(2).all(|w| w[0] != w[1]));
    // Untagged frames separate the two states.
    assert!(s.labels.windows(2).all(|w| match (w[0].state_tag, w[1].state_tag) {
        (Some(a), Some(b)) => a == b,
        _ => true,
    }));
}

#[test]
fn every_motion_emits_its_own_tags() {
    let layout = SceneLayout::default();
    for kind in MotionKind::ALL {
        let s = gen_motion(kind, 16.0, &layout).unwrap();
        let tags: Vec<StateTag> = s.labels.iter().filter_map(|l| l.state_tag).collect();
        let expected: Vec<StateTag> = StateTag::ALL.into_iter().filter(|t| t.motion() == kind).collect();
        for e in expected {
            assert!(tags.contains(&e), "{kind} never emits {e}");
        }
        assert!(tags.iter().all(|t| t.motion() == kind));
    }
}

#[test]
fn walk_translates_the_root() {
    let layout = SceneLayout::default();
    let s = gen_motion(MotionKind::Walk, 8.0, &layout).unwrap();
    let xs: Vec<f64> = s.labels.iter().map(|l| l.pose.keypoints[kp::LEFT_HIP][0]).collect();
    let span = xs.iter().cloned().fold(f64::MIN, f64::max) - xs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(span > 0.3, "hip x span {span}");
}

#[test]
fn frozen_scene_gives_identical_frames_and_no_motion_features() {
    let layout = quiet();
    let s = gen_motion(MotionKind::RiseHand, 2.0, &layout).unwrap();
    let frozen = s.frozen(s.labels[0].pose);
    let frames = simulate_csi(&frozen, 3).unwrap();
    assert_eq!(frames.len(), 50);
    assert!(frames.windows(2).all(|w| w[0].gains() == w[1].gains()));
    let f = extract_features(&frames, &WindowConfig::default()).unwrap();
    for i in 0..f.len() {
        for k in 0..N_SUBCARRIERS {
            for r in 0..N_RRUS {
                for c in [ch::NORM_STD, ch::MAD, ch::IQR, ch::DOPPLER] {
                    assert!(f.get(i, k, r, c).abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn simulation_is_deterministic_before_noise() {
    let layout = quiet();
    let s = gen_motion(MotionKind::Lunge, 1.0, &layout).unwrap();
    assert_eq!(simulate_csi(&s, 1).unwrap(), simulate_csi(&s, 99).unwrap());
    let noisy = gen_motion(MotionKind::Lunge, 1.0, &SceneLayout::default()).unwrap();
    assert_eq!(simulate_csi(&noisy, 5).unwrap(), simulate_csi(&noisy, 5).unwrap());
    assert_ne!(simulate_csi(&noisy, 5).unwrap(), simulate_csi(&noisy, 6).unwrap());
}

/// Frames from one scatterer moving along `dir` at `speed` m/s, no direct
/// path and no noise.
fn moving_scatterer(layout: &SceneLayout, start: [f64; 3], dir: [f64; 3], speed: f64, n: usize) -> Vec<CsiFrame> {
    (0..n)
        .map(|i| {
            let t = i as f64 / layout.csi_rate;
            let p = [0, 1, 2].map(|a| start[a] + dir[a] * speed * t);
            let s = Scatterer::new(p, 0.5).unwrap();
            CsiFrame::new(t, synth::channel(layout, &[s], 0.0)).unwrap()
        })
        .collect()
}

/// Path-length rate by central differences of the geometry alone.
fn path_rate(layout: &SceneLayout, start: [f64; 3], dir: [f64; 3], speed: f64, r: usize, t: f64) -> f64 {
    let len = |t: f64| {
        let p = [0, 1, 2].map(|a| start[a] + dir[a] * speed * t);
        dist(layout.ue, p) + dist(p, layout.rrus[r])
    };
    let h = 1e-4;
    (len(t + h) - len(t - h)) / (2.0 * h)
}

fn doppler_case(speed: f64) -> Vec<(f64, f64)> {
    let layout = quiet();
    let start = [1.4, 1.3, 1.0];
    // Radial with respect to the UE.
    let d = dist(layout.ue, start);
    let dir = [0, 1, 2].map(|a| (start[a] - layout.ue[a]) / d);
    let frames = moving_scatterer(&layout, start, dir, speed, 6);
    let f = extract_features(&frames, &WindowConfig::default()).unwrap();
    let dt = 1.0 / layout.csi_rate;
    let mut out = Vec::new();
    for i in 1..frames.len() {
        let mid = (i as f64 - 0.5) * dt;
        for r in 0..N_RRUS {
            for k in (0..N_SUBCARRIERS).step_by(67) {
                let oracle = -path_rate(&layout, start, dir, speed, r, mid) / layout.wavelength(k);
                out.push((f.get(i, k, r, ch::DOPPLER), oracle));
            }
        }
    }
    out
}

#[test]
fn doppler_matches_geometric_oracle() {
    // Paths whose two legs cancel have a near-zero rate; a relative bound
    // is meaningless there.
    let cases: Vec<_> = doppler_case(0.3).into_iter().filter(|(_, o)| o.abs() > 0.5).collect();
    assert!(cases.len() >= 50);
    for (est, oracle) in cases {
        assert!((est - oracle).abs() <= 0.05 * oracle.abs(), "{est} vs {oracle}");
    }
}

#[test]
fn doppler_sign_flips_with_velocity() {
    let fwd = doppler_case(0.3);
    let back = doppler_case(-0.3);
    for ((a, o), (b, _)) in fwd.iter().zip(&back) {
        if o.abs() > 0.5 {
            assert!(a * b < 0.0, "{a} {b}");
        }
    }
}

#[test]
fn detrend_slope_recovers_direct_path_delay() {
    let layout = quiet();
    let frame = CsiFrame::new(0.0, synth::channel(&layout, &[], 1.0)).unwrap();
    let raw = raw_phase(&frame).unwrap();
    for r in 0..N_RRUS {
        let series: Vec<f64> = (0..N_SUBCARRIERS).map(|k| raw[k * N_RRUS + r]).collect();
        let (slope, _) = linear_fit(&unwrap(&series)).unwrap();
        let tau = dist(layout.ue, layout.rrus[r]) / SPEED_OF_LIGHT;
        let expected = -TAU * tau * layout.spacing_hz;
        assert!((slope - expected).abs() <= 0.01 * expected.abs(), "rru {r}: {slope} vs {expected}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn amplitude_bounded_by_path_gains(kind in 0usize..5, t in 0.0f64..16.0) {
        let layout = quiet();
        let pose = motion_pose(&layout, MotionKind::ALL[kind], t);
        let sc = body_scatterers(&layout, &pose);
        let bound = layout.direct_gain + sc.iter().map(|s| s.reflectivity).sum::<f64>();
        let frame = CsiFrame::new(0.0, synth::channel(&layout, &sc, layout.direct_gain)).unwrap();
        for a in amplitude(&frame) {
            prop_assert!(a <= bound + 1e-12);
        }
    }
}

#[test]
fn default_dataset_counts() {
    let ds = make_dataset(&MotionKind::ALL, 16.0, &SceneLayout::default(), 11).unwrap();
    assert_eq!(ds.labels.len(), 1200);
    assert_eq!(ds.frames.len(), 2000);
    assert_eq!(ds.counts.len(), 5);
    assert!(ds.manifest().ends_with("total 1200 2000\n"));
    let lt: Vec<f64> = ds.labels.iter().map(|l| l.timestamp).collect();
    let ct: Vec<f64> = ds.frames.iter().map(|f| f.timestamp()).collect();
    for a in align_nearest(&lt, &ct).unwrap() {
        assert!(a.gap <= 0.022 + 1e-12, "gap {}", a.gap);
    }
}

#[test]
fn same_seed_same_bytes() {
    let layout = SceneLayout::default();
    let kinds = [MotionKind::Walk, MotionKind::Squat];
    let a = make_dataset(&kinds, 2.0, &layout, 4).unwrap();
    let b = make_dataset(&kinds, 2.0, &layout, 4).unwrap();
    let c = make_dataset(&kinds, 2.0, &layout, 5).unwrap();
    let enc = |d: &synth::SynthDataset| encode_dataset(&d.frames, &d.labels, None).unwrap();
    assert_eq!(enc(&a), enc(&b));
    assert_ne!(enc(&a), enc(&c));
}

#[test]
fn empty_kind_list_rejected() {
    assert!(make_dataset(&[], 1.0, &SceneLayout::default(), 0).is_err());
}
