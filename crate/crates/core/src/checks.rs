//! Finite-difference gradient checks for every layer and both models, on
//! small random instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::nn;
use crate::autodiff::{grad_check, GradCheckConfig, GradCheckReport, Graph, NodeId, ParamStore, Tensor};
use crate::error::Result;
use crate::features::Domain;
use crate::model::{self, ModelConfig, ModelKind, OUTPUT_DIM};

/// Components in the order they are checked.
pub const COMPONENTS: [&str; 13] = [
    "linear",
    "relu",
    "softmax",
    "attention",
    "residual",
    "conv1d",
    "mse",
    "encoder",
    "fusion",
    "regress",
    "midipose",
    "midipose_concat",
    "baseline",
];

#[derive(Debug, Clone)]
pub struct ComponentCheck {
    pub name: &'static str,
    pub report: GradCheckReport,
}

fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero so ReLU kinks are rarely probed.
fn off_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let m = rng.random_range(0.1..1.0);
        if rng.random_bool(0.5) {
            m
        } else {
            -m
        }
    })
}

/// A scalar from `y` via a fixed random projection, so every output
/// element gets a distinct upstream gradient.
fn project(g: &mut Graph, y: NodeId, proj: &Tensor) -> Result<NodeId> {
    let r = g.input(proj.clone().reshape(g.value(y).shape())?)?;
    g.dot(y, r)
}

fn check(
    name: &'static str,
    store: ParamStore,
    f: impl Fn(&mut Graph, &ParamStore) -> Result<NodeId>,
    cfg: &GradCheckConfig,
) -> Result<ComponentCheck> {
    Ok(ComponentCheck {
        name,
        report: grad_check(f, &store, cfg)?,
    })
}

/// Runs one check of `component`. Parameters, inputs and projections are
/// drawn from `seed`.
pub fn check_component(component: &str, seed: u64, cfg: &GradCheckConfig) -> Result<ComponentCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let name = COMPONENTS
        .iter()
        .copied()
        .find(|c| *c == component)
        .ok_or_else(|| crate::error::Error::invalid(format!("unknown component {component:?}")))?;
    let tiny = ModelConfig::tiny();
    match name {
        "linear" => {
            nn::init_linear(&mut store, "l", 5, 4, &mut rng);
            store.insert("x", rand_tensor(&[3, 5], &mut rng));
            let proj = rand_tensor(&[12], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = nn::linear(g, s, "l", x)?;
                project(g, y, &proj)
            }, cfg)
        }
        "relu" => {
            store.insert("x", off_zero(&[4, 6], &mut rng));
            let proj = rand_tensor(&[24], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = g.relu(x)?;
                project(g, y, &proj)
            }, cfg)
        }
        "softmax" => {
            store.insert("x", rand_tensor(&[4, 5], &mut rng));
            let proj = rand_tensor(&[20], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = g.softmax(x)?;
                project(g, y, &proj)
            }, cfg)
        }
        "attention" => {
            let (batch, tokens, dim, heads) = (2, 3, 8, 2);
            nn::init_attention(&mut store, "a", dim, &mut rng);
            store.insert("x", rand_tensor(&[batch * tokens, dim], &mut rng));
            let proj = rand_tensor(&[batch * tokens * dim], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = nn::multi_head_attention(g, s, "a", x, batch, tokens, heads)?;
                project(g, y, &proj)
            }, cfg)
        }
        "residual" => {
            nn::init_residual(&mut store, "r", 6, 5, &mut rng);
            store.insert("x", rand_tensor(&[3, 6], &mut rng));
            let proj = rand_tensor(&[18], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = nn::residual_block(g, s, "r", x)?;
                project(g, y, &proj)
            }, cfg)
        }
        "conv1d" => {
            nn::init_conv1d(&mut store, "c", 3, 4, 5, &mut rng);
            store.insert("x", rand_tensor(&[2, 9, 3], &mut rng));
            // Output length (9 + 4 − 5)/2 + 1 = 5.
            let proj = rand_tensor(&[2 * 5 * 4], &mut rng);
            let pooled_proj = rand_tensor(&[2 * 4], &mut rng);
            check(name, store, move |g, s| {
                let x = g.param_from(s, "x")?;
                let y = nn::conv1d(g, s, "c", x, 5, 2, 2)?;
                let m = g.mean_axis1(y)?;
                let a = project(g, y, &proj)?;
                let b = project(g, m, &pooled_proj)?;
                g.add(a, b)
            }, cfg)
        }
        "mse" => {
            store.insert("p", rand_tensor(&[3, OUTPUT_DIM], &mut rng));
            let target = rand_tensor(&[3, OUTPUT_DIM], &mut rng);
            check(name, store, move |g, s| {
                let p = g.param_from(s, "p")?;
                let t = g.input(target.clone())?;
                model::pose_loss(g, p, t)
            }, cfg)
        }
        "encoder" => {
            store = model::init_params(ModelKind::MiDiPose, &tiny, rng.random())?;
            let d = Domain::ALL[rng.random_range(0..3)];
            let x = rand_tensor(&[3, tiny.input_dim(d)], &mut rng);
            let proj = rand_tensor(&[3 * tiny.latent], &mut rng);
            let prefix = format!("enc.{}.", d.name());
            let store = only(store, &[&prefix]);
            check(name, store, move |g, s| {
                let x = g.input(x.clone())?;
                let y = model::encode_domain(g, s, &tiny, d, x)?;
                project(g, y, &proj)
            }, cfg)
        }
        "fusion" => {
            store = only(model::init_params(ModelKind::MiDiPose, &tiny, rng.random())?, &["fuse."]);
            for z in ["za", "zp", "zd"] {
                store.insert(z, rand_tensor(&[2, tiny.latent], &mut rng));
            }
            let proj = rand_tensor(&[2 * tiny.fused_dim()], &mut rng);
            check(name, store, move |g, s| {
                let z = [g.param_from(s, "za")?, g.param_from(s, "zp")?, g.param_from(s, "zd")?];
                let y = model::fuse(g, s, &tiny, z)?;
                project(g, y, &proj)
            }, cfg)
        }
        "regress" => {
            store = only(
                model::init_params(ModelKind::MiDiPose, &tiny, rng.random())?,
                &["backbone.", "head."],
            );
            store.insert("f", rand_tensor(&[2, tiny.fused_dim()], &mut rng));
            let proj = rand_tensor(&[2 * OUTPUT_DIM], &mut rng);
            check(name, store, move |g, s| {
                let f = g.param_from(s, "f")?;
                let y = model::regress_pose(g, s, &tiny, f)?;
                project(g, y, &proj)
            }, cfg)
        }
        "midipose" | "midipose_concat" => {
            let mut mc = tiny;
            if name == "midipose_concat" {
                mc.fusion = model::Fusion::Concat;
            }
            store = model::init_params(ModelKind::MiDiPose, &mc, rng.random())?;
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..mc.row_len()).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let x = model::split_domains(&refs, &mc)?;
            let target = rand_tensor(&[2, OUTPUT_DIM], &mut rng);
            check(name, store, move |g, s| {
                let y = model::midipose_forward(g, s, &mc, &x)?;
                let t = g.input(target.clone())?;
                model::pose_loss(g, y, t)
            }, cfg)
        }
        "baseline" => {
            store = model::init_params(ModelKind::Baseline, &tiny, rng.random())?;
            let rows: Vec<Vec<f64>> = (0..2)
                .map(|_| (0..tiny.row_len()).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let x = model::baseline_input(&refs, &tiny)?;
            let target = rand_tensor(&[2, OUTPUT_DIM], &mut rng);
            check(name, store, move |g, s| {
                let x = g.input(x.clone())?;
                let y = model::baseline_forward(g, s, &tiny, x)?;
                let t = g.input(target.clone())?;
                model::pose_loss(g, y, t)
            }, cfg)
        }
        _ => unreachable!("component list and match arms agree"),
    }
}

fn only(store: ParamStore, prefixes: &[&str]) -> ParamStore {
    let mut out = ParamStore::new();
    for (name, t) in store.iter() {
        if prefixes.iter().any(|p| name.starts_with(p)) {
            out.insert(name.clone(), t.clone());
        }
    }
    out
}

/// Every component on one seed.
pub fn check_all(seed: u64, cfg: &GradCheckConfig) -> Result<Vec<ComponentCheck>> {
    COMPONENTS.iter().map(|c| check_component(c, seed, cfg)).collect()
}
