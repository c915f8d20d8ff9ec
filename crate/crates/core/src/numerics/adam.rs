use std::collections::HashMap;

use super::{NumericsError, ParamId, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied to this parameter.
    pub t: u64,
}

/// Adam with bias correction. Moments and step counts are kept per
/// parameter, so a parameter that only some tasks touch is corrected by its
/// own update count.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    moments: HashMap<ParamId, Moments>,
    steps: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            moments: HashMap::new(),
            steps: 0,
        }
    }

    pub fn moments(&self, id: ParamId) -> Option<&Moments> {
        self.moments.get(&id)
    }

    /// Number of `update` calls so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one Adam step to each of `ids` and clears their gradients.
    /// Every listed parameter must carry a gradient.
    pub fn update(&mut self, params: &mut ParamSet, ids: &[ParamId]) -> Result<(), NumericsError> {
        if let Some(&missing) = ids.iter().find(|id| params.get(**id).grad().is_none()) {
            return Err(NumericsError::MissingGrad(params.name(missing).to_string()));
        }
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        for &id in ids {
            let tensor = params.get_mut(id);
            let grad = tensor.take_grad().expect("checked above");
            let n = grad.len();
            let st = self.moments.entry(id).or_insert_with(|| Moments {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
            });
            st.t += 1;
            let c1 = 1.0 - beta1.powi(st.t as i32);
            let c2 = 1.0 - beta2.powi(st.t as i32);
            for (((p, g), m), v) in tensor.data_mut().iter_mut().zip(&grad).zip(&mut st.m).zip(&mut st.v) {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        self.steps += 1;
        Ok(())
    }
}

/// Global L2 norm of the gradients of `ids` (missing gradients count as 0).
pub fn grad_norm(params: &ParamSet, ids: &[ParamId]) -> f64 {
    ids.iter()
        .filter_map(|id| params.get(*id).grad())
        .flat_map(|g| g.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Rescales the gradients of `ids` so their global norm is at most
/// `max_norm`. Returns the norm before clipping.
pub fn clip_grad_norm(params: &mut ParamSet, ids: &[ParamId], max_norm: f64) -> f64 {
    let norm = grad_norm(params, ids);
    if norm > max_norm && norm.is_finite() {
        let s = max_norm / norm;
        for &id in ids {
            if let Some(mut g) = params.get_mut(id).take_grad() {
                g.iter_mut().for_each(|x| *x *= s);
                params.get_mut(id).set_grad(g);
            }
        }
    }
    norm
}
