//! Synthetic multipath scene: an articulated skeleton performing scripted
//! motions in front of one UE and three RRUs, and the OFDM channel it
//! produces.
//!
//! Skeletons live in metric coordinates `(x, z)` on a vertical plane at depth
//! `body_depth`; labels are the same joints scaled into `[0, 1]²`
//! (x by the area width, z by `height_scale`).

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::csi::{kp, CsiFrame, LabeledFrame, MotionKind, Pose2D, StateTag, N_KEYPOINTS, N_RRUS, N_SUBCARRIERS};
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    /// Width (x) and depth (y) of the sensing area, metres.
    pub area: [f64; 2],
    pub ue: [f64; 3],
    pub rrus: [[f64; 3]; N_RRUS],
    pub carrier_hz: f64,
    pub spacing_hz: f64,
    pub csi_rate: f64,
    pub label_rate: f64,
    /// `None` disables noise.
    pub snr_db: Option<f64>,
    /// Depth of the body plane, metres.
    pub body_depth: f64,
    /// Metres per unit of normalized height.
    pub height_scale: f64,
    /// Gain of the direct UE→RRU path.
    pub direct_gain: f64,
    /// Uniform timestamp jitter half-width, seconds.
    pub jitter: f64,
}

impl Default for SceneLayout {
    fn default() -> Self {
        Self {
            area: [3.3, 2.7],
            ue: [0.0, 0.0, 1.5],
            rrus: [[3.3, 0.0, 1.5], [0.0, 2.7, 1.5], [3.3, 2.7, 1.5]],
            carrier_hz: 3.5e9,
            spacing_hz: 30e3,
            csi_rate: 25.0,
            label_rate: 15.0,
            snr_db: Some(25.0),
            body_depth: 1.2,
            height_scale: 2.0,
            direct_gain: 1.0,
            jitter: 0.002,
        }
    }
}

impl SceneLayout {
    pub fn validate(&self) -> Result<()> {
        let mut pts = vec![self.ue];
        pts.extend(self.rrus);
        for (i, a) in pts.iter().enumerate() {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("antenna position must be finite"));
            }
            for b in &pts[i + 1..] {
                if dist(*a, *b) < 1e-6 {
                    return Err(Error::invalid("antenna positions must be distinct"));
                }
            }
        }
        let positive = [
            self.area[0],
            self.area[1],
            self.carrier_hz,
            self.spacing_hz,
            self.csi_rate,
            self.label_rate,
            self.height_scale,
        ];
        if positive.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::invalid("area, frequencies, rates and scale must be positive"));
        }
        if !(self.jitter >= 0.0 && self.jitter < 0.25 / self.csi_rate.max(self.label_rate)) {
            return Err(Error::invalid(format!("jitter {} too large for the sample rates", self.jitter)));
        }
        if !(self.direct_gain.is_finite() && self.direct_gain >= 0.0) {
            return Err(Error::invalid("direct gain must be non-negative"));
        }
        if let Some(s) = self.snr_db {
            if !s.is_finite() {
                return Err(Error::invalid("snr must be finite"));
            }
        }
        Ok(())
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.carrier_hz + (k as f64 - (N_SUBCARRIERS / 2) as f64) * self.spacing_hz
    }

    pub fn wavelength(&self, k: usize) -> f64 {
        SPEED_OF_LIGHT / self.frequency(k)
    }

    /// Normalized `[x, y]` label coordinates → metric scene position.
    pub fn to_metric(&self, xy: [f64; 2]) -> [f64; 3] {
        [xy[0] * self.area[0], self.body_depth, xy[1] * self.height_scale]
    }

    /// Length of UE → `p` → RRU `r`.
    pub fn path_length(&self, p: [f64; 3], r: usize) -> f64 {
        dist(self.ue, p) + dist(p, self.rrus[r])
    }
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub position: [f64; 3],
    pub reflectivity: f64,
}

impl Scatterer {
    pub fn new(position: [f64; 3], reflectivity: f64) -> Result<Self> {
        if position.iter().any(|v| !v.is_finite()) || !(reflectivity > 0.0 && reflectivity <= 1.0) {
            return Err(Error::invalid(format!(
                "scatterer at {position:?} with reflectivity {reflectivity}"
            )));
        }
        Ok(Self { position, reflectivity })
    }
}

/// Joints that carry a scatterer and their reflectivity.
pub const BODY_SCATTERERS: [(usize, f64); 12] = [
    (kp::LEFT_SHOULDER, 0.3),
    (kp::RIGHT_SHOULDER, 0.3),
    (kp::LEFT_ELBOW, 0.15),
    (kp::RIGHT_ELBOW, 0.15),
    (kp::LEFT_WRIST, 0.1),
    (kp::RIGHT_WRIST, 0.1),
    (kp::LEFT_HIP, 0.3),
    (kp::RIGHT_HIP, 0.3),
    (kp::LEFT_KNEE, 0.2),
    (kp::RIGHT_KNEE, 0.2),
    (kp::LEFT_ANKLE, 0.1),
    (kp::RIGHT_ANKLE, 0.1),
];

pub fn body_scatterers(layout: &SceneLayout, pose: &Pose2D) -> Vec<Scatterer> {
    BODY_SCATTERERS
        .iter()
        .map(|&(j, rho)| Scatterer {
            position: layout.to_metric(pose.keypoints[j]),
            reflectivity: rho,
        })
        .collect()
}

/// Noise-free `h(f_k, rru) = a₀·e^{−j2πf_kτ₀} + Σ ρ·e^{−j2πf_kτ}`,
/// laid out `[subcarrier][rru]`.
pub fn channel(layout: &SceneLayout, scatterers: &[Scatterer], direct_gain: f64) -> Vec<Complex64> {
    let mut h = vec![Complex64::new(0.0, 0.0); N_SUBCARRIERS * N_RRUS];
    for r in 0..N_RRUS {
        let mut paths = Vec::with_capacity(scatterers.len() + 1);
        if direct_gain > 0.0 {
            paths.push((direct_gain, dist(layout.ue, layout.rrus[r]) / SPEED_OF_LIGHT));
        }
        for s in scatterers {
            paths.push((s.reflectivity, layout.path_length(s.position, r) / SPEED_OF_LIGHT));
        }
        for k in 0..N_SUBCARRIERS {
            let f = layout.frequency(k);
            h[k * N_RRUS + r] = paths
                .iter()
                .map(|&(a, tau)| Complex64::from_polar(a, -TAU * (f * tau).fract()))
                .sum();
        }
    }
    h
}

/// Adds circular complex Gaussian noise at `snr_db` relative to the mean
/// power of `h`.
pub fn add_noise(h: &mut [Complex64], snr_db: f64, rng: &mut impl Rng) {
    let power = h.iter().map(|c| c.norm_sqr()).sum::<f64>() / h.len() as f64;
    let sigma = (power / 10f64.powf(snr_db / 10.0) / 2.0).sqrt();
    for c in h.iter_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *c += Complex64::new(sigma * re, sigma * im);
    }
}

/// Metric joint angles and offsets that fully determine a skeleton.
#[derive(Debug, Clone, Copy, Default)]
struct Articulation {
    root_x: f64,
    /// Forward thigh flexion (foreshortens the thigh), per side [left, right].
    thigh_flex: [f64; 2],
    /// Sideways leg angle away from the body midline.
    leg_abduction: [f64; 2],
    /// Arm angle from hanging (0) towards overhead (π), sideways.
    arm_raise: [f64; 2],
    elbow_bend: [f64; 2],
}

const ANKLE_HEIGHT: f64 = 0.05;
const THIGH: f64 = 0.45;
const SHIN: f64 = 0.45;
const HIP_HALF: f64 = 0.1;
const TORSO: f64 = 0.5;
const SHOULDER_HALF: f64 = 0.2;
const UPPER_ARM: f64 = 0.3;
const FOREARM: f64 = 0.28;

/// Vertical reach of a leg from hip to ankle.
fn leg_drop(flex: f64, abduction: f64) -> f64 {
    (THIGH * flex.cos() + SHIN) * abduction.cos()
}

impl Articulation {
    /// Metric `(x, z)` joints. The pelvis height is set by the lower of the
    /// two legs so that at least one ankle rests on the floor.
    fn joints(&self) -> [[f64; 2]; N_KEYPOINTS] {
        let mut j = [[0.0; 2]; N_KEYPOINTS];
        let drops = [0, 1].map(|s| leg_drop(self.thigh_flex[s], self.leg_abduction[s]));
        let pelvis_z = ANKLE_HEIGHT + drops[0].max(drops[1]);
        // Left side is +x.
        let sides = [(1.0, kp::LEFT_HIP, kp::LEFT_KNEE, kp::LEFT_ANKLE), (-1.0, kp::RIGHT_HIP, kp::RIGHT_KNEE, kp::RIGHT_ANKLE)];
        for (s, &(sign, hip, knee, ankle)) in sides.iter().enumerate() {
            let h = [self.root_x + sign * HIP_HALF, pelvis_z];
            let a = self.leg_abduction[s];
            let dir = [sign * a.sin(), -a.cos()];
            let thigh = THIGH * self.thigh_flex[s].cos();
            let k = [h[0] + thigh * dir[0], h[1] + thigh * dir[1]];
            j[hip] = h;
            j[knee] = k;
            j[ankle] = [k[0] + SHIN * dir[0], k[1] + SHIN * dir[1]];
        }
        let shoulder_z = pelvis_z + TORSO;
        let arms = [(1.0, kp::LEFT_SHOULDER, kp::LEFT_ELBOW, kp::LEFT_WRIST), (-1.0, kp::RIGHT_SHOULDER, kp::RIGHT_ELBOW, kp::RIGHT_WRIST)];
        for (s, &(sign, sh, el, wr)) in arms.iter().enumerate() {
            let p = [self.root_x + sign * SHOULDER_HALF, shoulder_z];
            let a = self.arm_raise[s];
            let e = [p[0] + sign * UPPER_ARM * a.sin(), p[1] - UPPER_ARM * a.cos()];
            let b = a + self.elbow_bend[s];
            j[sh] = p;
            j[el] = e;
            j[wr] = [e[0] + sign * FOREARM * b.sin(), e[1] - FOREARM * b.cos()];
        }
        let nose = [self.root_x, shoulder_z + 0.25];
        j[kp::NOSE] = nose;
        j[kp::LEFT_EYE] = [nose[0] + 0.035, nose[1] + 0.03];
        j[kp::RIGHT_EYE] = [nose[0] - 0.035, nose[1] + 0.03];
        j[kp::LEFT_EAR] = [nose[0] + 0.075, nose[1]];
        j[kp::RIGHT_EAR] = [nose[0] - 0.075, nose[1]];
        j
    }
}

const CENTER_X: f64 = 1.65;

impl MotionKind {
    /// Seconds per motion cycle.
    pub fn period(self) -> f64 {
        match self {
            MotionKind::Marktime => 2.0,
            MotionKind::Lunge => 4.0,
            MotionKind::RiseHand => 3.0,
            MotionKind::Walk => 8.0,
            MotionKind::Squat => 3.0,
        }
    }
}

fn pos_sq(v: f64) -> f64 {
    v.max(0.0).powi(2)
}

fn articulate(kind: MotionKind, t: f64) -> Articulation {
    let phi = TAU * t / kind.period();
    let s = phi.sin();
    let mut a = Articulation {
        root_x: CENTER_X,
        arm_raise: [0.15, 0.15],
        ..Default::default()
    };
    match kind {
        MotionKind::Marktime => {
            let lift = 70f64.to_radians();
            a.thigh_flex = [lift * pos_sq(s), lift * pos_sq(-s)];
            a.arm_raise = [0.15 + 0.25 * pos_sq(-s), 0.15 + 0.25 * pos_sq(s)];
            a.elbow_bend = [0.6 * pos_sq(-s), 0.6 * pos_sq(s)];
        }
        MotionKind::Lunge => {
            // Lunging leg steps out and bends; the other leg stays straight
            // and angles out just enough to keep its ankle on the floor.
            let (l, r) = (pos_sq(s), pos_sq(-s));
            let out = 35f64.to_radians();
            let bend = 60f64.to_radians();
            for (side, w) in [(0, l), (1, r)] {
                if w > 0.0 {
                    a.leg_abduction[side] = out * w;
                    a.thigh_flex[side] = bend * w;
                    let drop = leg_drop(a.thigh_flex[side], a.leg_abduction[side]);
                    a.leg_abduction[1 - side] = (drop / (THIGH + SHIN)).min(1.0).acos();
                }
            }
            a.arm_raise = [0.15 + 0.5 * l, 0.15 + 0.5 * r];
        }
        MotionKind::RiseHand => {
            let up = 150f64.to_radians();
            a.arm_raise = [0.15 + (up - 0.15) * pos_sq(s), 0.15 + (up - 0.15) * pos_sq(-s)];
            a.elbow_bend = [0.3 * pos_sq(s), 0.3 * pos_sq(-s)];
        }
        MotionKind::Walk => {
            let gait = (TAU * t / 2.0).sin();
            let step = 30f64.to_radians();
            a.root_x = CENTER_X + 0.8 * s;
            a.thigh_flex = [step * pos_sq(gait), step * pos_sq(-gait)];
            a.arm_raise = [0.15 + 0.2 * pos_sq(-gait), 0.15 + 0.2 * pos_sq(gait)];
        }
        MotionKind::Squat => {
            let depth = (1.0 - phi.cos()) / 2.0;
            let bend = 80f64.to_radians() * depth;
            a.thigh_flex = [bend, bend];
            a.leg_abduction = [0.15 * depth, 0.15 * depth];
            a.arm_raise = [0.15 + 1.2 * depth, 0.15 + 1.2 * depth];
            a.elbow_bend = [0.4 * depth, 0.4 * depth];
        }
    }
    a
}

/// Phase band around each extremum that counts as the tagged state.
pub const TAG_HALF_WIDTH: f64 = FRAC_PI_8;

fn near(phi: f64, target: f64) -> bool {
    let d = (phi - target).rem_euclid(TAU);
    d.min(TAU - d) <= TAG_HALF_WIDTH
}

fn state_at(kind: MotionKind, t: f64) -> Option<StateTag> {
    let phi = TAU * t / kind.period();
    let (first, second) = (near(phi, FRAC_PI_2), near(phi, 3.0 * FRAC_PI_2));
    match kind {
        MotionKind::Marktime => first.then_some(StateTag::Marktime1).or(second.then_some(StateTag::Marktime2)),
        MotionKind::Lunge => first.then_some(StateTag::Lunge1).or(second.then_some(StateTag::Lunge2)),
        MotionKind::RiseHand => first.then_some(StateTag::RiseHand1).or(second.then_some(StateTag::RiseHand2)),
        // Turnaround points of the back-and-forth walk.
        MotionKind::Walk => (first || second).then_some(StateTag::Walk),
        MotionKind::Squat => near(phi, PI).then_some(StateTag::Squat),
    }
}

/// Normalized pose of `kind` at time `t` seconds into the motion.
pub fn motion_pose(layout: &SceneLayout, kind: MotionKind, t: f64) -> Pose2D {
    let joints = articulate(kind, t).joints();
    Pose2D {
        keypoints: joints.map(|[x, z]| [x / layout.area[0], z / layout.height_scale]),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Source {
    Motion,
    Frozen(Pose2D),
}

/// A motion sampled at the label rate, with the continuous trajectory kept
/// for sampling CSI at other instants.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub kind: MotionKind,
    pub duration: f64,
    pub label_rate: f64,
    pub layout: SceneLayout,
    /// Labels at `j / label_rate`, local time.
    pub labels: Vec<LabeledFrame>,
    source: Source,
}

impl MotionScript {
    pub fn pose_at(&self, t: f64) -> Pose2D {
        match &self.source {
            Source::Motion => motion_pose(&self.layout, self.kind, t),
            Source::Frozen(p) => *p,
        }
    }

    pub fn tag_at(&self, t: f64) -> Option<StateTag> {
        match self.source {
            Source::Motion => state_at(self.kind, t),
            Source::Frozen(_) => None,
        }
    }

    /// The same script with every joint held at `pose`.
    pub fn frozen(&self, pose: Pose2D) -> Self {
        let mut s = self.clone();
        s.source = Source::Frozen(pose);
        for l in &mut s.labels {
            l.pose = pose;
            l.state_tag = None;
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::invalid(format!("duration {duration} must be finite and non-negative")));
    }
    Ok(())
}

pub fn gen_motion(kind: MotionKind, duration: f64, layout: &SceneLayout) -> Result<MotionScript> {
    check_duration(duration)?;
    layout.validate()?;
    let n = sample_count(duration, layout.label_rate);
    let labels = (0..n)
        .map(|j| {
            let t = j as f64 / layout.label_rate;
            LabeledFrame::new(motion_pose(layout, kind, t), t, kind, state_at(kind, t))
        })
        .collect::<Result<_>>()?;
    Ok(MotionScript {
        kind,
        duration,
        label_rate: layout.label_rate,
        layout: layout.clone(),
        labels,
        source: Source::Motion,
    })
}

fn sample_count(duration: f64, rate: f64) -> usize {
    (duration * rate - 1e-9).ceil().max(0.0) as usize
}

fn frame_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// CSI frame at local time `t` of `script`, with noise drawn from `rng` if
/// the layout has an SNR.
pub fn simulate_at(script: &MotionScript, t: f64, timestamp: f64, rng: &mut impl Rng) -> Result<CsiFrame> {
    let layout = &script.layout;
    let mut h = channel(layout, &body_scatterers(layout, &script.pose_at(t)), layout.direct_gain);
    if let Some(snr) = layout.snr_db {
        add_noise(&mut h, snr, rng);
    }
    CsiFrame::new(timestamp, h)
}

/// Frames at `csi_rate` over the script duration, no jitter. Noise for
/// frame `i` is drawn from stream `i + 1` of `seed`.
pub fn simulate_csi(script: &MotionScript, seed: u64) -> Result<Vec<CsiFrame>> {
    let n = sample_count(script.duration, script.layout.csi_rate);
    (0..n)
        .map(|i| {
            let t = i as f64 / script.layout.csi_rate;
            simulate_at(script, t, t, &mut frame_rng(seed, i as u64 + 1))
        })
        .collect()
}

/// Output of [`make_dataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub frames: Vec<CsiFrame>,
    pub labels: Vec<LabeledFrame>,
    /// `(motion, labels, csi frames)` in generation order.
    pub counts: Vec<(MotionKind, usize, usize)>,
}

impl SynthDataset {
    /// One `motion labels csi_frames` line per motion, then totals.
    pub fn manifest(&self) -> String {
        let mut out = String::from("motion labels csi_frames\n");
        for (kind, l, f) in &self.counts {
            out.push_str(&format!("{kind} {l} {f}\n"));
        }
        out.push_str(&format!("total {} {}\n", self.labels.len(), self.frames.len()));
        out
    }
}

/// Consecutive motions, each `per_kind_duration` seconds, with jittered
/// label and CSI timestamps on one global clock.
pub fn make_dataset(
    kinds: &[MotionKind],
    per_kind_duration: f64,
    layout: &SceneLayout,
    seed: u64,
) -> Result<SynthDataset> {
    if kinds.is_empty() {
        return Err(Error::invalid("no motion kinds requested"));
    }
    check_duration(per_kind_duration)?;
    layout.validate()?;
    let mut jitter_rng = frame_rng(seed, 0);
    let mut jitter = || {
        if layout.jitter > 0.0 {
            jitter_rng.random_range(-layout.jitter..=layout.jitter)
        } else {
            0.0
        }
    };
    let mut out = SynthDataset {
        frames: Vec::new(),
        labels: Vec::new(),
        counts: Vec::new(),
    };
    let mut stream = 1u64;
    for (m, &kind) in kinds.iter().enumerate() {
        let script = gen_motion(kind, per_kind_duration, layout)?;
        let offset = m as f64 * per_kind_duration;
        for l in &script.labels {
            let t = l.timestamp + jitter();
            let local = t.max(0.0);
            out.labels
                .push(LabeledFrame::new(script.pose_at(local), offset + t, kind, script.tag_at(local))?);
        }
        let n_frames = sample_count(per_kind_duration, layout.csi_rate);
        for i in 0..n_frames {
            let t = i as f64 / layout.csi_rate + jitter();
            let mut rng = frame_rng(seed, stream);
            stream += 1;
            out.frames.push(simulate_at(&script, t.max(0.0), offset + t, &mut rng)?);
        }
        out.counts.push((kind, script.labels.len(), n_frames));
    }
    Ok(out)
}
