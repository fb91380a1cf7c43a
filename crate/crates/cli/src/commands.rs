use std::fs;
use std::path::{Path, PathBuf};

use midipose::autodiff::GradCheckConfig;
use midipose::checks::{check_component, COMPONENTS};
use midipose::csi::KEYPOINT_NAMES;
use midipose::eval::{evaluate, pck, EvalSlice, PckResult};
use midipose::model::{train_with_progress, Model};
use midipose::pipeline::{prepare, Prepared};
use midipose::{read_dataset, synth, write_dataset, Dataset, MotionKind, StateTag};

use crate::config::RunConfig;
use crate::Failure;

/// Gradient checks pass below this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn ensure_parent(path: &Path) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(())
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    ensure_parent(path)?;
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn manifest_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("manifest.txt")
}

pub fn loss_log_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("loss.txt")
}

pub fn split_path(checkpoint: &Path) -> PathBuf {
    checkpoint.with_extension("split.txt")
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let p = &cfg.paths.dataset;
    if !p.exists() {
        return Err(Failure::Runtime(format!("dataset {} not found; run `midipose synth` first", p.display())));
    }
    Ok(read_dataset(p)?)
}

fn load_prepared(cfg: &RunConfig) -> Result<Prepared, Failure> {
    let ds = load_dataset(cfg)?;
    let spec = cfg.train.split_spec().map_err(Failure::Usage)?;
    Ok(prepare(&ds.frames, &ds.labels, &cfg.window(), &spec)?)
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    if !path.exists() {
        return Err(Failure::Runtime(format!("checkpoint {} not found", path.display())));
    }
    Model::load(path).map_err(|e| Failure::Runtime(format!("checkpoint {}: {e}", path.display())))
}

pub fn synth(cfg: &RunConfig) -> Result<(), Failure> {
    let kinds = cfg.scene.kinds().map_err(Failure::Usage)?;
    let ds = synth::make_dataset(&kinds, cfg.scene.duration, &cfg.scene.layout(), cfg.scene.seed)
        .map_err(|e| Failure::Usage(format!("scene: {e}")))?;
    ensure_parent(&cfg.paths.dataset)?;
    write_dataset(&ds.frames, &ds.labels, &cfg.paths.dataset)?;
    let manifest = ds.manifest();
    write_file(&manifest_path(&cfg.paths.dataset), &manifest)?;
    print!("{manifest}");
    println!("wrote {}", cfg.paths.dataset.display());
    Ok(())
}

pub fn train(cfg: &RunConfig) -> Result<(), Failure> {
    let kind = cfg.train.kind().map_err(Failure::Usage)?;
    let tc = cfg.train.train_config().map_err(Failure::Usage)?;
    let mc = cfg.train.model_config().map_err(Failure::Usage)?;
    let p = load_prepared(cfg)?;
    let rows = p.rows(&p.split.train);
    let poses = p.poses(&p.split.train);
    let out = train_with_progress(&rows, &poses, kind, &mc, &tc, |e| {
        eprintln!("epoch {:>3}  lr {:<10}  loss {:.6}", e.epoch, e.lr, e.mean_loss)
    })?;
    let ckpt = &cfg.paths.checkpoint;
    ensure_parent(ckpt)?;
    out.model.save(ckpt)?;
    write_file(&loss_log_path(ckpt), out.loss_log())?;
    write_file(&split_path(ckpt), p.split.to_index_file())?;
    let val = out.model.predict(&p.rows(&p.split.val))?;
    let val_pck = pck(&val, &p.poses(&p.split.val), 20.0)?;
    println!(
        "trained {kind} on {} samples; validation PCK@20 {val_pck:.2}; wrote {}",
        rows.len(),
        ckpt.display()
    );
    Ok(())
}

fn slices(cfg: &RunConfig) -> Vec<EvalSlice> {
    let mut out = Vec::new();
    if cfg.eval.slices.iter().any(|s| s == "state") {
        out.extend(StateTag::ALL.map(EvalSlice::State));
    }
    if cfg.eval.slices.iter().any(|s| s == "process") {
        out.extend(MotionKind::ALL.map(EvalSlice::Process));
    }
    out
}

pub fn eval(cfg: &RunConfig, checkpoints: &[PathBuf]) -> Result<(), Failure> {
    let p = load_prepared(cfg)?;
    let idx = match cfg.eval.split.as_str() {
        "train" => &p.split.train,
        "val" => &p.split.val,
        _ => &p.split.test,
    };
    let samples = p.eval_samples(idx);
    let mut result = PckResult::default();
    let mut names: Vec<String> = Vec::new();
    for c in checkpoints {
        let model = load_model(c)?;
        let name = model.kind.name().to_string();
        if names.contains(&name) {
            return Err(Failure::Usage(format!("two checkpoints of kind {name}; tables would be ambiguous")));
        }
        names.push(name);
        result.extend(evaluate(&model, &samples, &slices(cfg), &cfg.eval.thresholds)?);
    }
    let text = result.to_text();
    let dir = &cfg.paths.reports;
    write_file(&dir.join("pck.txt"), &text)?;
    write_file(&dir.join("pck.csv"), result.to_csv())?;
    print!("{text}");
    println!("{} {} samples; wrote {}", cfg.eval.split, samples.len(), dir.display());
    Ok(())
}

pub fn infer(cfg: &RunConfig, checkpoint: &Path, index: usize) -> Result<(), Failure> {
    let ds = load_dataset(cfg)?;
    if index >= ds.frames.len() {
        return Err(Failure::Usage(format!(
            "frame index {index} out of range; valid range is 0..={}",
            ds.frames.len() - 1
        )));
    }
    let model = load_model(checkpoint)?;
    let features = midipose::extract_features(&ds.frames, &cfg.window())?;
    let pose = model.predict_one(features.row(index))?;
    for (name, [x, y]) in KEYPOINT_NAMES.iter().zip(pose.keypoints) {
        println!("{name} {x} {y}");
    }
    Ok(())
}

pub fn gradcheck(cfg: &RunConfig, seeds: u64, inject_fault: bool) -> Result<(), Failure> {
    if seeds == 0 {
        return Err(Failure::Usage("--seeds must be at least 1".into()));
    }
    let gc = GradCheckConfig {
        analytic_scale: if inject_fault { 1.01 } else { 1.0 },
        ..GradCheckConfig::default()
    };
    let mut failed = Vec::new();
    println!("{:<16} {:>12} {:>8}  status", "component", "max_rel_err", "coords");
    for c in COMPONENTS {
        let mut worst = 0.0f64;
        let mut coords = 0;
        for s in 0..seeds {
            let r = check_component(c, cfg.train.seed + s, &gc)?.report;
            worst = worst.max(r.max_rel_error);
            coords += r.checked;
        }
        let ok = worst < GRADCHECK_TOLERANCE;
        if !ok {
            failed.push(c);
        }
        println!("{c:<16} {worst:>12.3e} {coords:>8}  {}", if ok { "pass" } else { "FAIL" });
    }
    if failed.is_empty() {
        println!("all {} components pass", COMPONENTS.len());
        Ok(())
    } else {
        Err(Failure::Check(format!("gradient check failed for {}", failed.join(", "))))
    }
}
