//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use midipose::autodiff::GradCheckConfig;
use midipose::checks::check_all;
use midipose::csi::{channel as ch, N_RRUS, N_SUBCARRIERS};
use midipose::dataset::{decode_dataset, encode_dataset};
use midipose::eval::{evaluate, pck, EvalSlice, PckResult, PoseModel, PCK_THRESHOLDS};
use midipose::features::{linear_detrend, linear_fit, unwrap, window_stats, wrap_phase};
use midipose::model::{train, Model, ModelConfig, ModelKind, TrainConfig, TrainOutcome};
use midipose::pipeline::{prepare, Prepared};
use midipose::synth::{self, make_dataset, SceneLayout, Scatterer};
use midipose::{align_nearest, extract_features, CsiFrame, MotionKind, Pose2D, SplitSpec, WindowConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;
const GRAD_SEEDS: u64 = 10;
const ORACLE_TOL: f64 = 1e-9;
const DFS_MEDIAN_TOL: f64 = 0.05;
const STAGE_BUDGET: Duration = Duration::from_secs(60);
const ALIGN_GAP: f64 = 0.022;
const TARGET_PCK20: f64 = 90.0;
const MIN_PCK5_WINS: usize = 3;
const TRAIN_BUDGET: Duration = Duration::from_secs(15 * 60);
const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradient_fidelity() -> Outcome {
    let t = Instant::now();
    let mut worst = (0.0, String::new());
    let mut checks = 0;
    for seed in 0..GRAD_SEEDS {
        match check_all(seed, &GradCheckConfig::default()) {
            Ok(list) => {
                for c in list {
                    checks += 1;
                    if c.report.max_rel_error > worst.0 || worst.1.is_empty() {
                        worst = (c.report.max_rel_error, format!("{} seed {seed}", c.name));
                    }
                }
            }
            Err(e) => return outcome(false, format!("seed {seed}: {e}")),
        }
    }
    let elapsed = t.elapsed();
    outcome(
        worst.0 < GRAD_TOL && elapsed < STAGE_BUDGET,
        format!(
            "{checks} checks, max rel error {:.2e} ({}) < {GRAD_TOL:e}; {:.1}s (limit {}s)",
            worst.0,
            worst.1,
            elapsed.as_secs_f64(),
            STAGE_BUDGET.as_secs()
        ),
    )
}

/// Population statistics computed directly from their definitions.
fn reference_stats(x: &[f64], eps: f64) -> [f64; 3] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let quantile = |v: &[f64], q: f64| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let h = (s.len() - 1) as f64 * q;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        s[lo] * (1.0 - (h - lo as f64)) + s[hi] * (h - lo as f64)
    };
    let med = quantile(x, 0.5);
    let dev: Vec<f64> = x.iter().map(|v| (v - med).abs()).collect();
    [sd / (mean.abs() + eps), quantile(&dev, 0.5), quantile(x, 0.75) - quantile(x, 0.25)]
}

fn dfs_relative_errors() -> Vec<f64> {
    let layout = SceneLayout {
        snr_db: None,
        ..SceneLayout::default()
    };
    let start = [1.4, 1.3, 1.0];
    let d0: f64 = (0..3).map(|a| (start[a] - layout.ue[a]).powi(2)).sum::<f64>().sqrt();
    let dir: [f64; 3] = std::array::from_fn(|a| (start[a] - layout.ue[a]) / d0);
    let speed = 0.3;
    let at = |t: f64| -> [f64; 3] { std::array::from_fn(|a| start[a] + dir[a] * speed * t) };
    let dist = |a: [f64; 3], b: [f64; 3]| (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt();
    let dt = 1.0 / layout.csi_rate;
    let frames: Vec<CsiFrame> = (0..8)
        .map(|i| {
            let s = Scatterer::new(at(i as f64 * dt), 0.5).unwrap();
            CsiFrame::new(i as f64 * dt, synth::channel(&layout, &[s], 0.0)).unwrap()
        })
        .collect();
    let f = extract_features(&frames, &WindowConfig::default()).unwrap();
    let mut errs = Vec::new();
    for i in 1..frames.len() {
        let mid = (i as f64 - 0.5) * dt;
        for r in 0..N_RRUS {
            let len = |t: f64| dist(layout.ue, at(t)) + dist(at(t), layout.rrus[r]);
            let rate = (len(mid + 1e-4) - len(mid - 1e-4)) / 2e-4;
            for k in 0..N_SUBCARRIERS {
                let oracle = -rate / layout.wavelength(k);
                if oracle.abs() > 0.5 {
                    errs.push((f.get(i, k, r, ch::DOPPLER) - oracle).abs() / oracle.abs());
                }
            }
        }
    }
    errs
}

fn feature_oracles() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);

    let mut unwrap_err = 0.0f64;
    for _ in 0..100 {
        let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-10.0..10.0));
        let ramp: Vec<f64> = (0..544).map(|k| a * k as f64 / 544.0 * 3.0 + b).collect();
        let step = ramp.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        if step >= PI {
            continue;
        }
        let wrapped: Vec<f64> = ramp.iter().map(|&v| wrap_phase(v)).collect();
        let u = unwrap(&wrapped);
        let shift = u[0] - ramp[0];
        unwrap_err = unwrap_err.max(u.iter().zip(&ramp).map(|(x, y)| (x - y - shift).abs()).fold(0.0, f64::max));
        // Any 2π offset is allowed; the first sample fixes it.
        let turns = shift / (2.0 * PI);
        unwrap_err = unwrap_err.max((turns - turns.round()).abs() * 2.0 * PI);
    }

    let mut detrend_err = 0.0f64;
    for _ in 0..100 {
        let phi: Vec<f64> = (0..544).map(|_| rng.random_range(-PI..PI)).collect();
        let r = linear_detrend(&phi).unwrap();
        let (slope, _) = linear_fit(&r).unwrap();
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        detrend_err = detrend_err.max(slope.abs()).max(mean.abs());
    }

    let mut stats_err = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(2..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let s = window_stats(&x, 1e-9).unwrap();
        let r = reference_stats(&x, 1e-9);
        stats_err = stats_err.max((s.nstd - r[0]).abs()).max((s.mad - r[1]).abs()).max((s.iqr - r[2]).abs());
    }

    let mut errs = dfs_relative_errors();
    errs.sort_by(f64::total_cmp);
    let median = errs.get(errs.len() / 2).copied().unwrap_or(f64::INFINITY);
    let elapsed = t.elapsed();
    let pass = unwrap_err <= ORACLE_TOL
        && detrend_err <= ORACLE_TOL
        && stats_err <= ORACLE_TOL
        && median <= DFS_MEDIAN_TOL
        && elapsed < STAGE_BUDGET;
    outcome(
        pass,
        format!(
            "unwrap {unwrap_err:.1e}, detrend {detrend_err:.1e}, window stats {stats_err:.1e} (tol {ORACLE_TOL:e}); \
             DFS median rel error {:.2}% over {} entries (tol {:.0}%); {:.1}s",
            100.0 * median,
            errs.len(),
            100.0 * DFS_MEDIAN_TOL,
            elapsed.as_secs_f64()
        ),
    )
}

fn random_pose(rng: &mut impl Rng) -> Pose2D {
    let mut k = [[0.0; 2]; 17];
    for p in &mut k {
        *p = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
    }
    k[5][1] = rng.random_range(0.6..0.9);
    k[11][1] = rng.random_range(0.1..0.4);
    Pose2D { keypoints: k }
}

fn brute_force_pck(preds: &[Pose2D], gts: &[Pose2D], alpha: f64) -> f64 {
    let mut hits = 0usize;
    for f in 0..gts.len() {
        let g = gts[f].keypoints;
        let torso = ((g[5][0] + g[6][0]) / 2.0 - (g[11][0] + g[12][0]) / 2.0)
            .hypot((g[5][1] + g[6][1]) / 2.0 - (g[11][1] + g[12][1]) / 2.0);
        for j in 0..17 {
            let p = preds[f].keypoints[j];
            if (p[0] - g[j][0]).hypot(p[1] - g[j][1]) <= alpha / 100.0 * torso {
                hits += 1;
            }
        }
    }
    100.0 * hits as f64 / (17 * gts.len()) as f64
}

/// Replays fixed predictions, looked up by the first feature value.
struct Replay(Vec<Pose2D>);

impl PoseModel for Replay {
    fn name(&self) -> &str {
        "replay"
    }
    fn predict(&self, rows: &[&[f64]]) -> midipose::Result<Vec<Pose2D>> {
        Ok(rows.iter().map(|r| self.0[r[0] as usize]).collect())
    }
}

fn pck_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut mismatches = 0;
    let mut tables = 0;
    let mut monotone = true;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let gts: Vec<Pose2D> = (0..n).map(|_| random_pose(&mut rng)).collect();
        let noise = rng.random_range(0.0..0.1);
        let preds: Vec<Pose2D> = gts
            .iter()
            .map(|g| g.map(|[x, y]| [x + noise * (x * 7.3).sin(), y + noise * (y * 5.1).cos()]))
            .collect();
        for a in PCK_THRESHOLDS {
            if pck(&preds, &gts, a).unwrap() != brute_force_pck(&preds, &gts, a) {
                mismatches += 1;
            }
        }
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let samples: Vec<_> = (0..n)
            .map(|i| midipose::eval::EvalSample {
                features: &rows[i],
                gt: gts[i],
                motion: MotionKind::ALL[i % 5],
                state_tag: None,
            })
            .collect();
        let table = evaluate(&Replay(preds), &samples, &EvalSlice::all(), &PCK_THRESHOLDS).unwrap();
        tables += 1;
        monotone &= table.is_monotone();
    }
    outcome(
        mismatches == 0 && monotone,
        format!("{mismatches} mismatches over 100 sets × 4 thresholds; {tables} tables monotone: {monotone}"),
    )
}

fn alignment_bound() -> Outcome {
    let mut worst = 0.0f64;
    let mut monotone = true;
    let mut pairs = 0;
    for seed in 0..3 {
        let ds = make_dataset(&MotionKind::ALL, 16.0, &SceneLayout::default(), SEED + seed).unwrap();
        let lt: Vec<f64> = ds.labels.iter().map(|l| l.timestamp).collect();
        let ct: Vec<f64> = ds.frames.iter().map(|f| f.timestamp()).collect();
        let a = align_nearest(&lt, &ct).unwrap();
        pairs += a.len();
        worst = a.iter().map(|p| p.gap).fold(worst, f64::max);
        monotone &= a.windows(2).all(|w| w[0].csi_index <= w[1].csi_index && w[0].label_index < w[1].label_index);
    }
    outcome(
        worst <= ALIGN_GAP && monotone,
        format!("{pairs} pairs, max gap {:.2} ms (limit {:.0} ms), monotone: {monotone}", worst * 1e3, ALIGN_GAP * 1e3),
    )
}

struct Trained {
    prepared: Prepared,
    midipose: TrainOutcome,
    baseline: TrainOutcome,
    elapsed: Duration,
}

fn train_kind(p: &Prepared, kind: ModelKind) -> TrainOutcome {
    let cfg = TrainConfig {
        seed: SEED,
        ..TrainConfig::default()
    };
    train(&p.rows(&p.split.train), &p.poses(&p.split.train), kind, &ModelConfig::default(), &cfg)
        .unwrap_or_else(|e| panic!("training {kind} failed: {e}"))
}

fn run_training() -> Trained {
    let t = Instant::now();
    let ds = make_dataset(&MotionKind::ALL, 16.0, &SceneLayout::default(), SEED).unwrap();
    let prepared = prepare(&ds.frames, &ds.labels, &WindowConfig::default(), &SplitSpec::with_seed(SEED)).unwrap();
    let midipose = train_kind(&prepared, ModelKind::MiDiPose);
    let baseline = train_kind(&prepared, ModelKind::Baseline);
    Trained {
        prepared,
        midipose,
        baseline,
        elapsed: t.elapsed(),
    }
}

fn end_to_end(t: &Trained) -> (Outcome, String) {
    let p = &t.prepared;
    let val = p.eval_samples(&p.split.val);
    let preds = t.midipose.model.predict(&p.rows(&p.split.val)).unwrap();
    let pck20 = pck(&preds, &p.poses(&p.split.val), 20.0).unwrap();
    let mut table = PckResult::default();
    for m in [&t.midipose.model, &t.baseline.model] {
        table.extend(evaluate(m, &val, &EvalSlice::all(), &PCK_THRESHOLDS).unwrap());
    }
    let wins = MotionKind::ALL
        .iter()
        .filter(|k| {
            let s = EvalSlice::Process(**k);
            match (table.get(s, "midipose", 5.0), table.get(s, "baseline", 5.0)) {
                (Some(a), Some(b)) => a > b,
                _ => false,
            }
        })
        .count();
    let pass = pck20 >= TARGET_PCK20 && wins >= MIN_PCK5_WINS && t.elapsed <= TRAIN_BUDGET && table.is_monotone();
    (
        outcome(
            pass,
            format!(
                "{} train / {} val samples; val PCK@20 {pck20:.2} (need ≥ {TARGET_PCK20}); PCK@5 wins {wins}/5 \
                 (need ≥ {MIN_PCK5_WINS}); {:.0}s (limit {}s)",
                p.split.train.len(),
                p.split.val.len(),
                t.elapsed.as_secs_f64(),
                TRAIN_BUDGET.as_secs()
            ),
        ),
        table.to_text(),
    )
}

fn determinism(first: &Trained) -> Outcome {
    let p = &first.prepared;
    let again = train_kind(p, ModelKind::MiDiPose);
    let same_ckpt = again.model.to_bytes().unwrap() == first.midipose.model.to_bytes().unwrap();
    let same_log = again.loss_log() == first.midipose.loss_log();
    outcome(
        same_ckpt && same_log,
        format!("checkpoint identical: {same_ckpt}; loss log identical: {same_log}"),
    )
}

fn round_trips(t: &Trained) -> Outcome {
    let ds = make_dataset(&[MotionKind::Squat, MotionKind::Walk], 2.0, &SceneLayout::default(), SEED).unwrap();
    let feats = extract_features(&ds.frames, &WindowConfig::default()).unwrap();
    let mut ok = true;
    for f in [None, Some(&feats)] {
        let a = encode_dataset(&ds.frames, &ds.labels, f).unwrap();
        let d = decode_dataset(&a).unwrap();
        let b = encode_dataset(&d.frames, &d.labels, d.features.as_ref()).unwrap();
        ok &= a == b;
    }
    let mut ckpt_ok = true;
    for m in [&t.midipose.model, &t.baseline.model] {
        let a = m.to_bytes().unwrap();
        let b = Model::from_bytes(&a).unwrap().to_bytes().unwrap();
        ckpt_ok &= a == b;
    }
    outcome(ok && ckpt_ok, format!("MDP1 (with and without features) identical: {ok}; MDPW identical: {ckpt_ok}"))
}

fn report(n: usize, name: &str, o: &Outcome) -> bool {
    println!("[{}] {n}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    o.pass
}

fn main() {
    let mut all = true;
    all &= report(1, "gradient fidelity", &gradient_fidelity());
    all &= report(2, "feature-domain oracles", &feature_oracles());
    all &= report(3, "PCK oracle equivalence", &pck_oracle());
    all &= report(4, "alignment bound", &alignment_bound());
    let trained = run_training();
    let (e2e, table) = end_to_end(&trained);
    all &= report(5, "end-to-end training", &e2e);
    print!("{table}");
    all &= report(6, "determinism", &determinism(&trained));
    all &= report(7, "file round-trips", &round_trips(&trained));
    println!("acceptance: {}", if all { "all criteria pass" } else { "FAILED" });
    if !all {
        std::process::exit(1);
    }
}
