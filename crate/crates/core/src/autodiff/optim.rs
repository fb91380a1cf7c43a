use std::collections::BTreeMap;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Step decay: `base_lr · factor^⌊epoch / period⌋`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiStepSchedule {
    pub base_lr: f64,
    pub factor: f64,
    pub period: usize,
}

impl Default for MultiStepSchedule {
    fn default() -> Self {
        Self {
            base_lr: 0.008,
            factor: 0.5,
            period: 10,
        }
    }
}

impl MultiStepSchedule {
    pub fn lr(&self, epoch: usize) -> f64 {
        self.base_lr * self.factor.powi((epoch / self.period.max(1)) as i32)
    }
}

pub fn lr_schedule(epoch: usize) -> f64 {
    MultiStepSchedule::default().lr(epoch)
}

/// Heavy-ball SGD: `v ← μ·v + g + λ·p`, `p ← p − lr·v`. The decay `λ`
/// applies to weight matrices (`*.w`) only.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMomentum {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: BTreeMap<String, Tensor>,
}

impl SgdMomentum {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self {
            lr,
            momentum,
            weight_decay: 0.0,
            velocity: BTreeMap::new(),
        }
    }

    pub fn velocity(&self, name: &str) -> Option<&Tensor> {
        self.velocity.get(name)
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "sgd_step",
                    format!("{name}: param {:?} vs grad {:?}", p.shape(), g.shape()),
                ));
            }
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    op: "sgd_step",
                    scope: name.clone(),
                });
            }
        }
        for (name, g) in grads {
            let p = params.get_mut(name)?;
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(g.shape()));
            let decay = if name.ends_with(".w") { self.weight_decay } else { 0.0 };
            for ((pv, vv), gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
                *vv = self.momentum * *vv + gv + decay * *pv;
                *pv -= self.lr * *vv;
            }
        }
        Ok(())
    }
}
