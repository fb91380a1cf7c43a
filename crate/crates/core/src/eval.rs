//! PCK@α with torso normalization, sliced by motion state and motion process.

use std::fmt::Write as _;

use crate::csi::{kp, MotionKind, Pose2D, StateTag, N_KEYPOINTS};
use crate::error::{Error, Result};

pub const PCK_THRESHOLDS: [f64; 4] = [5.0, 10.0, 20.0, 30.0];

/// Distance between the shoulder midpoint and the hip midpoint.
pub fn torso_length(gt: &Pose2D) -> Result<f64> {
    let mid = |a: usize, b: usize| {
        let (p, q) = (gt.keypoints[a], gt.keypoints[b]);
        [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0]
    };
    let s = mid(kp::LEFT_SHOULDER, kp::RIGHT_SHOULDER);
    let h = mid(kp::LEFT_HIP, kp::RIGHT_HIP);
    let len = (s[0] - h[0]).hypot(s[1] - h[1]);
    if !(len >= 1e-6) {
        return Err(Error::invalid(format!("degenerate torso length {len}")));
    }
    Ok(len)
}

/// Number of keypoints within `α%` of the torso length (inclusive).
pub fn pck_count(preds: &[Pose2D], gts: &[Pose2D], alpha: f64) -> Result<usize> {
    if preds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if preds.len() != gts.len() {
        return Err(Error::invalid(format!(
            "{} predictions vs {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let mut hits = 0;
    for (p, g) in preds.iter().zip(gts) {
        let thr = alpha / 100.0 * torso_length(g)?;
        hits += p
            .keypoints
            .iter()
            .zip(&g.keypoints)
            .filter(|(a, b)| (a[0] - b[0]).hypot(a[1] - b[1]) <= thr)
            .count();
    }
    Ok(hits)
}

/// Percentage of keypoints within `α%` of the torso length.
pub fn pck(preds: &[Pose2D], gts: &[Pose2D], alpha: f64) -> Result<f64> {
    let hits = pck_count(preds, gts, alpha)?;
    Ok(100.0 * hits as f64 / (N_KEYPOINTS * preds.len()) as f64)
}

/// Anything that maps feature rows to poses.
pub trait PoseModel {
    fn name(&self) -> &str;
    fn predict(&self, rows: &[&[f64]]) -> Result<Vec<Pose2D>>;
}

impl PoseModel for crate::model::Model {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn predict(&self, rows: &[&[f64]]) -> Result<Vec<Pose2D>> {
        crate::model::Model::predict(self, rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EvalSlice {
    /// Frames tagged with a state.
    State(StateTag),
    /// All frames of a motion.
    Process(MotionKind),
}

impl EvalSlice {
    pub fn all() -> Vec<EvalSlice> {
        StateTag::ALL
            .iter()
            .map(|t| EvalSlice::State(*t))
            .chain(MotionKind::ALL.iter().map(|m| EvalSlice::Process(*m)))
            .collect()
    }

    pub fn kind(&self) -> &'static str {
        match self {
            EvalSlice::State(_) => "state",
            EvalSlice::Process(_) => "process",
        }
    }

    pub fn selector(&self) -> &'static str {
        match self {
            EvalSlice::State(t) => t.name(),
            EvalSlice::Process(m) => m.name(),
        }
    }

    pub fn selects(&self, s: &EvalSample<'_>) -> bool {
        match self {
            EvalSlice::State(t) => s.state_tag == Some(*t),
            EvalSlice::Process(m) => s.motion == *m,
        }
    }
}

impl std::fmt::Display for EvalSlice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.kind(), self.selector())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalSample<'a> {
    pub features: &'a [f64],
    pub gt: Pose2D,
    pub motion: MotionKind,
    pub state_tag: Option<StateTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PckRow {
    pub slice: EvalSlice,
    pub model: String,
    pub alpha: f64,
    pub pck: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PckResult {
    pub rows: Vec<PckRow>,
}

impl PckResult {
    pub fn get(&self, slice: EvalSlice, model: &str, alpha: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.slice == slice && r.model == model && r.alpha == alpha)
            .map(|r| r.pck)
    }

    pub fn extend(&mut self, other: PckResult) {
        self.rows.extend(other.rows);
    }

    /// Every (slice, model) series is non-decreasing in α.
    pub fn is_monotone(&self) -> bool {
        let mut rows: Vec<&PckRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (a.slice, &a.model)
                .cmp(&(b.slice, &b.model))
                .then(a.alpha.total_cmp(&b.alpha))
        });
        rows.windows(2)
            .all(|w| w[0].slice != w[1].slice || w[0].model != w[1].model || w[0].pck <= w[1].pck)
    }

    fn sorted(&self) -> Vec<&PckRow> {
        let mut model_order: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !model_order.contains(&r.model.as_str()) {
                model_order.push(&r.model);
            }
        }
        let model_rank = |m: &str| model_order.iter().position(|x| *x == m).unwrap_or(usize::MAX);
        let mut rows: Vec<&PckRow> = self.rows.iter().collect();
        rows.sort_by(|a, b| {
            (a.slice.kind() == "process", a.slice.selector(), model_rank(&a.model))
                .cmp(&(b.slice.kind() == "process", b.slice.selector(), model_rank(&b.model)))
                .then(a.alpha.total_cmp(&b.alpha))
        });
        rows
    }

    /// `slice,model,alpha,pck`, states before processes, selectors
    /// alphabetical, models in first-seen order, α ascending.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("slice,model,alpha,pck\n");
        for r in self.sorted() {
            let _ = writeln!(out, "{},{},{},{:.4}", r.slice, r.model, r.alpha, r.pck);
        }
        out
    }

    /// Aligned text tables, one for states and one for processes, with a
    /// column per threshold.
    pub fn to_text(&self) -> String {
        let mut alphas: Vec<f64> = self.rows.iter().map(|r| r.alpha).collect();
        alphas.sort_by(f64::total_cmp);
        alphas.dedup();
        let rows = self.sorted();
        let mut out = String::new();
        for kind in ["state", "process"] {
            let mut lines: Vec<(String, String, Vec<Option<f64>>)> = Vec::new();
            for r in rows.iter().filter(|r| r.slice.kind() == kind) {
                let sel = r.slice.selector().to_string();
                let col = alphas.iter().position(|a| *a == r.alpha).unwrap_or(0);
                match lines.last_mut() {
                    Some((s, m, v)) if *s == sel && *m == r.model => v[col] = Some(r.pck),
                    _ => {
                        let mut v = vec![None; alphas.len()];
                        v[col] = Some(r.pck);
                        lines.push((sel, r.model.clone(), v));
                    }
                }
            }
            if lines.is_empty() {
                continue;
            }
            let w0 = lines.iter().map(|l| l.0.len()).max().unwrap_or(0).max(kind.len());
            let w1 = lines.iter().map(|l| l.1.len()).max().unwrap_or(0).max(5);
            let _ = write!(out, "{kind:<w0$}  {:<w1$}", "model");
            for a in &alphas {
                let _ = write!(out, "  {:>7}", format!("PCK@{a}"));
            }
            out.push('\n');
            for (s, m, v) in &lines {
                let _ = write!(out, "{s:<w0$}  {m:<w1$}");
                for x in v {
                    match x {
                        Some(p) => {
                            let _ = write!(out, "  {p:>7.2}");
                        }
                        None => out.push_str("        -"),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// PCK at each α for every slice that selects at least one sample.
pub fn evaluate(
    model: &dyn PoseModel,
    samples: &[EvalSample<'_>],
    slices: &[EvalSlice],
    alphas: &[f64],
) -> Result<PckResult> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if slices.is_empty() || alphas.is_empty() {
        return Err(Error::invalid("no slices or thresholds to evaluate"));
    }
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features).collect();
    let preds = model.predict(&rows)?;
    let mut result = PckResult::default();
    for slice in slices {
        let (p, g): (Vec<Pose2D>, Vec<Pose2D>) = samples
            .iter()
            .zip(&preds)
            .filter(|(s, _)| slice.selects(s))
            .map(|(s, p)| (*p, s.gt))
            .unzip();
        if g.is_empty() {
            continue;
        }
        for &alpha in alphas {
            result.rows.push(PckRow {
                slice: *slice,
                model: model.name().to_string(),
                alpha,
                pck: pck(&p, &g, alpha)?,
                frames: g.len(),
            });
        }
    }
    Ok(result)
}
