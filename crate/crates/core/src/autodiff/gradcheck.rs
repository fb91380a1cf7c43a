//! Central finite-difference verification of reverse-mode gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{Graph, NodeId};
use super::params::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub h: f64,
    /// Check at most this many coordinates per parameter (sampled).
    pub max_coords: Option<usize>,
    pub seed: u64,
    /// Skip coordinates whose ±h probes change any ReLU active set; the
    /// function is not differentiable across that boundary.
    pub skip_kinks: bool,
    /// Multiplies analytic gradients before comparison (fault injection).
    pub analytic_scale: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 1e-5,
            max_coords: None,
            seed: 0,
            skip_kinks: true,
            analytic_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    pub skipped: usize,
    /// Parameter and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

/// Compares reverse-mode gradients of the scalar built by `forward` with
/// central differences `(f(p+h) − f(p−h)) / 2h`, per coordinate.
pub fn grad_check<F>(forward: F, params: &ParamStore, cfg: &GradCheckConfig) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, &ParamStore) -> Result<NodeId>,
{
    let eval = |store: &ParamStore| -> Result<(f64, u64)> {
        let mut g = Graph::new();
        let out = forward(&mut g, store)?;
        let v = g.value(out);
        if v.len() != 1 {
            return Err(Error::shape("grad_check", format!("non-scalar loss {:?}", v.shape())));
        }
        Ok((v.item(), g.activation_signature()))
    };

    let mut g = Graph::new();
    let out = forward(&mut g, params)?;
    let base_sig = g.activation_signature();
    let grads = g.backward(out)?.into_param_grads(params);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut store = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
        worst: None,
    };
    for (name, grad) in &grads {
        let n = grad.len();
        let coords: Vec<usize> = match cfg.max_coords {
            Some(m) if m < n => {
                let mut c = sample(&mut rng, n, m).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..n).collect(),
        };
        for i in coords {
            let orig = store.get(name)?.data()[i];
            store.get_mut(name)?.data_mut()[i] = orig + cfg.h;
            let (fp, sp) = eval(&store)?;
            store.get_mut(name)?.data_mut()[i] = orig - cfg.h;
            let (fm, sm) = eval(&store)?;
            store.get_mut(name)?.data_mut()[i] = orig;
            if cfg.skip_kinks && (sp != base_sig || sm != base_sig) {
                report.skipped += 1;
                continue;
            }
            let numeric = (fp - fm) / (2.0 * cfg.h);
            let analytic = grad.data()[i] * cfg.analytic_scale;
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.clone(), i));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn quadratic_store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::new(&[4], vec![0.3, -1.2, 2.5, 0.01]).unwrap());
        s
    }

    fn quadratic(g: &mut Graph, s: &ParamStore) -> Result<NodeId> {
        let x = g.param_from(s, "x")?;
        g.sum_squares(x)
    }

    #[test]
    fn quadratic_is_exact() {
        let r = grad_check(quadratic, &quadratic_store(), &GradCheckConfig::default()).unwrap();
        assert_eq!(r.checked, 4);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let cfg = GradCheckConfig {
            analytic_scale: 1.01,
            ..GradCheckConfig::default()
        };
        let r = grad_check(quadratic, &quadratic_store(), &cfg).unwrap();
        assert!(r.max_rel_error > 1e-3, "{r:?}");
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let r = grad_check(
            |g: &mut Graph, s: &ParamStore| g.param_from(s, "x"),
            &quadratic_store(),
            &GradCheckConfig::default(),
        );
        assert!(r.is_err());
    }
}
