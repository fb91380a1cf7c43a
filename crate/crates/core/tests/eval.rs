use midipose::csi::kp;
use midipose::eval::{evaluate, pck, pck_count, torso_length, EvalSample, EvalSlice, PckResult, PoseModel, PCK_THRESHOLDS};
use midipose::{MotionKind, Pose2D, Result, StateTag};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn upright() -> Pose2D {
    let mut k = [[0.5, 0.5]; 17];
    k[kp::LEFT_SHOULDER] = [0.45, 0.6];
    k[kp::RIGHT_SHOULDER] = [0.55, 0.6];
    k[kp::LEFT_HIP] = [0.45, 0.4];
    k[kp::RIGHT_HIP] = [0.55, 0.4];
    Pose2D { keypoints: k }
}

fn random_pose(rng: &mut impl Rng) -> Pose2D {
    let mut k = [[0.0; 2]; 17];
    for p in &mut k {
        *p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    }
    k[kp::LEFT_SHOULDER][1] = rng.random_range(0.6..0.8);
    k[kp::LEFT_HIP][1] = rng.random_range(0.2..0.4);
    Pose2D { keypoints: k }
}

fn jitter(p: &Pose2D, scale: f64, rng: &mut impl Rng) -> Pose2D {
    let mut k = p.keypoints;
    if scale == 0.0 {
        return *p;
    }
    for q in &mut k {
        q[0] += rng.random_range(-scale..scale);
        q[1] += rng.random_range(-scale..scale);
    }
    Pose2D { keypoints: k }
}

/// Double loop written out independently of the library.
fn oracle_pck(preds: &[Pose2D], gts: &[Pose2D], alpha: f64) -> f64 {
    let mut hits = 0usize;
    let mut total = 0usize;
    for f in 0..gts.len() {
        let g = &gts[f].keypoints;
        let sx = (g[5][0] + g[6][0]) / 2.0;
        let sy = (g[5][1] + g[6][1]) / 2.0;
        let hx = (g[11][0] + g[12][0]) / 2.0;
        let hy = (g[11][1] + g[12][1]) / 2.0;
        let torso = (sx - hx).hypot(sy - hy);
        for j in 0..17 {
            let p = preds[f].keypoints[j];
            let d = (p[0] - g[j][0]).hypot(p[1] - g[j][1]);
            if d <= alpha / 100.0 * torso {
                hits += 1;
            }
            total += 1;
        }
    }
    100.0 * hits as f64 / total as f64
}

#[test]
fn torso_of_vertical_segment() {
    assert!((torso_length(&upright()).unwrap() - 0.2).abs() < 1e-12);
}

#[test]
fn torso_scales_and_rejects_degenerate() {
    let p = upright();
    let s = p.map(|[x, y]| [3.0 * x, 3.0 * y]);
    assert!((torso_length(&s).unwrap() - 3.0 * torso_length(&p).unwrap()).abs() < 1e-12);
    let flat = Pose2D { keypoints: [[0.3, 0.3]; 17] };
    assert!(torso_length(&flat).is_err());
}

#[test]
fn torso_matches_midpoint_recompute() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let p = random_pose(&mut rng);
        let k = p.keypoints;
        let m = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5];
        let s = m(k[5], k[6]);
        let h = m(k[11], k[12]);
        let want = ((s[0] - h[0]).powi(2) + (s[1] - h[1]).powi(2)).sqrt();
        assert!((torso_length(&p).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn perfect_predictions_score_100() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let gts: Vec<Pose2D> = (0..10).map(|_| random_pose(&mut rng)).collect();
    for a in PCK_THRESHOLDS {
        assert_eq!(pck(&gts, &gts, a).unwrap(), 100.0);
    }
}

#[test]
fn single_offset_keypoint_threshold_arithmetic() {
    let frames = 4;
    let gts = vec![upright(); frames];
    let mut preds = gts.clone();
    // 0.04 × torso 0.2 along x.
    preds[2].keypoints[kp::NOSE][0] += 0.008;
    assert_eq!(pck(&preds, &gts, 5.0).unwrap(), 100.0);
    let want = (17.0 * frames as f64 - 1.0) / (17.0 * frames as f64) * 100.0;
    assert!((pck(&preds, &gts, 3.0).unwrap() - want).abs() < 1e-12);
}

#[test]
fn matches_brute_force_oracle_on_100_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for set in 0..100 {
        let n = rng.random_range(1..30);
        let gts: Vec<Pose2D> = (0..n).map(|_| random_pose(&mut rng)).collect();
        let preds: Vec<Pose2D> = gts.iter().map(|g| jitter(g, 0.05, &mut rng)).collect();
        for a in PCK_THRESHOLDS {
            assert_eq!(pck(&preds, &gts, a).unwrap(), oracle_pck(&preds, &gts, a), "set {set} α {a}");
        }
    }
}

#[test]
fn empty_and_mismatched_inputs_rejected() {
    assert!(pck(&[], &[], 5.0).is_err());
    assert!(pck_count(&[upright()], &[upright(), upright()], 5.0).is_err());
}

/// Pose grid on multiples of 1/1024 so translations and power-of-two
/// scalings are exact.
fn dyadic_pose() -> impl Strategy<Value = Pose2D> {
    proptest::array::uniform17([0u32..1024, 0u32..1024]).prop_map(|k| {
        let mut kp = k.map(|[x, y]| [x as f64 / 1024.0, y as f64 / 1024.0]);
        kp[5][1] = 0.75;
        kp[6][1] = 0.75;
        kp[11][1] = 0.25;
        kp[12][1] = 0.25;
        Pose2D { keypoints: kp }
    })
}

proptest! {
    #[test]
    fn invariant_under_translation_and_scaling(
        gt in dyadic_pose(),
        pred in dyadic_pose(),
        tx in -64i32..64,
        ty in -64i32..64,
        s in 0i32..4,
    ) {
        let (dx, dy) = (tx as f64 / 64.0, ty as f64 / 64.0);
        let shift = |p: &Pose2D| p.map(|[x, y]| [x + dx, y + dy]);
        let f = (2.0f64).powi(s);
        let scale = |p: &Pose2D| p.map(|[x, y]| [x * f, y * f]);
        for a in PCK_THRESHOLDS {
            let base = pck(&[pred], &[gt], a).unwrap();
            prop_assert_eq!(base, pck(&[shift(&pred)], &[shift(&gt)], a).unwrap());
            prop_assert_eq!(base, pck(&[scale(&pred)], &[scale(&gt)], a).unwrap());
        }
    }

    #[test]
    fn monotone_in_alpha(seed in any::<u64>(), a1 in 0.0f64..50.0, a2 in 0.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gts: Vec<Pose2D> = (0..5).map(|_| random_pose(&mut rng)).collect();
        let preds: Vec<Pose2D> = gts.iter().map(|g| jitter(g, 0.1, &mut rng)).collect();
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        prop_assert!(pck(&preds, &gts, lo).unwrap() <= pck(&preds, &gts, hi).unwrap());
    }
}

/// Returns the ground truth stored alongside each feature row.
struct Oracle {
    name: &'static str,
    poses: Vec<Pose2D>,
    noise: f64,
}

impl PoseModel for Oracle {
    fn name(&self) -> &str {
        self.name
    }

    fn predict(&self, rows: &[&[f64]]) -> Result<Vec<Pose2D>> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        Ok(rows
            .iter()
            .map(|r| jitter(&self.poses[r[0] as usize], self.noise, &mut rng))
            .collect())
    }
}

struct Fixture {
    rows: Vec<Vec<f64>>,
    poses: Vec<Pose2D>,
    motions: Vec<MotionKind>,
    tags: Vec<Option<StateTag>>,
}

impl Fixture {
    fn new() -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let motions = [MotionKind::Squat, MotionKind::Marktime, MotionKind::Squat, MotionKind::Marktime, MotionKind::Squat];
        let tags = [Some(StateTag::Squat), Some(StateTag::Marktime1), None, None, None];
        Self {
            rows: (0..5).map(|i| vec![i as f64]).collect(),
            poses: (0..5).map(|_| random_pose(&mut rng)).collect(),
            motions: motions.to_vec(),
            tags: tags.to_vec(),
        }
    }

    fn samples(&self) -> Vec<EvalSample<'_>> {
        (0..self.rows.len())
            .map(|i| EvalSample {
                features: &self.rows[i],
                gt: self.poses[i],
                motion: self.motions[i],
                state_tag: self.tags[i],
            })
            .collect()
    }

    fn model(&self, name: &'static str, noise: f64) -> Oracle {
        Oracle {
            name,
            poses: self.poses.clone(),
            noise,
        }
    }
}

#[test]
fn perfect_stub_scores_100_on_every_present_slice() {
    let fx = Fixture::new();
    let r = evaluate(&fx.model("stub", 0.0), &fx.samples(), &EvalSlice::all(), &PCK_THRESHOLDS).unwrap();
    assert!(r.rows.iter().all(|row| row.pck == 100.0));
    // Two states and two motions are present; the rest are absent.
    assert_eq!(r.rows.len(), 4 * PCK_THRESHOLDS.len());
    assert!(r.get(EvalSlice::State(StateTag::Lunge1), "stub", 5.0).is_none());
    let squat = r.rows.iter().find(|row| row.slice == EvalSlice::Process(MotionKind::Squat)).unwrap();
    assert_eq!(squat.frames, 3);
    let state = r.rows.iter().find(|row| row.slice == EvalSlice::State(StateTag::Squat)).unwrap();
    assert_eq!(state.frames, 1);
}

#[test]
fn tables_are_monotone_and_csv_is_stable() {
    let fx = Fixture::new();
    let samples = fx.samples();
    let run = || {
        let mut r = evaluate(&fx.model("midipose", 0.02), &samples, &EvalSlice::all(), &PCK_THRESHOLDS).unwrap();
        r.extend(evaluate(&fx.model("baseline", 0.06), &samples, &EvalSlice::all(), &PCK_THRESHOLDS).unwrap());
        r
    };
    let (a, b) = (run(), run());
    assert!(a.is_monotone());
    assert_eq!(a.to_csv().into_bytes(), b.to_csv().into_bytes());
    let csv = a.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "slice,model,alpha,pck");
    // States first, alphabetical; models paired per slice; α ascending.
    assert!(lines[1].starts_with("state:marktime1,midipose,5,"));
    assert!(lines[5].starts_with("state:marktime1,baseline,5,"));
    assert!(lines[9].starts_with("state:squat,midipose,5,"));
    assert!(lines[17].starts_with("process:marktime,midipose,5,"));
    assert!(lines[32].starts_with("process:squat,baseline,30,"));
    assert_eq!(lines.len(), 33);
    let text = a.to_text();
    assert!(text.contains("PCK@5") && text.contains("process"));
}

#[test]
fn single_cell_result_has_one_row() {
    let fx = Fixture::new();
    let r = evaluate(&fx.model("m", 0.0), &fx.samples(), &[EvalSlice::Process(MotionKind::Squat)], &[10.0]).unwrap();
    assert_eq!(r.to_csv().lines().count(), 2);
    let broken = PckResult {
        rows: vec![
            midipose::eval::PckRow { pck: 50.0, ..r.rows[0].clone() },
            midipose::eval::PckRow { alpha: 20.0, pck: 40.0, ..r.rows[0].clone() },
        ],
    };
    assert!(!broken.is_monotone());
}

#[test]
fn evaluate_rejects_empty_requests() {
    let fx = Fixture::new();
    let m = fx.model("m", 0.0);
    assert!(evaluate(&m, &[], &EvalSlice::all(), &PCK_THRESHOLDS).is_err());
    assert!(evaluate(&m, &fx.samples(), &[], &PCK_THRESHOLDS).is_err());
}
