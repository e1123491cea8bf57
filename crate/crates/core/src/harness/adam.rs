use std::collections::BTreeMap;

use crate::autodiff::GradientMap;
use crate::error::{Error, Result};
use crate::params::ParameterStore;
use crate::tensor::Tensor;

/// Adam moments and hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl AdamState {
    /// `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`.
    pub fn new(lr: f64) -> Self {
        AdamState::with_hyperparameters(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyperparameters(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        AdamState { lr, beta1, beta2, eps, step: 0, first: BTreeMap::new(), second: BTreeMap::new() }
    }

    /// Number of completed steps.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.first.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.second.get(name)
    }
}

/// One bias-corrected Adam update. Parameters absent from `grads` are left
/// alone; every gradient is validated before anything is written.
pub fn adam_step(params: &mut ParameterStore, grads: &GradientMap, state: &mut AdamState) -> Result<()> {
    for (name, g) in grads {
        let p = params.get(name).ok_or_else(|| Error::config(format!("gradient for unknown parameter `{name}`")))?;
        if p.shape() != g.shape() {
            return Err(Error::dim("adam_step", p.shape(), g.shape()));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let (b1, b2) = (state.beta1, state.beta2);
    let correct1 = 1.0 - b1.powf(t);
    let correct2 = 1.0 - b2.powf(t);
    for (name, g) in grads {
        let param = params.get_mut(name).expect("validated above");
        let m = state
            .first
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape().to_vec()).expect("gradient shape is valid"));
        let v = state
            .second
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(g.shape().to_vec()).expect("gradient shape is valid"));
        let (m, v) = (m.data_mut(), v.data_mut());
        for (i, (theta, &grad)) in param.data_mut().iter_mut().zip(g.data()).enumerate() {
            m[i] = b1 * m[i] + (1.0 - b1) * grad;
            v[i] = b2 * v[i] + (1.0 - b2) * grad * grad;
            let m_hat = m[i] / correct1;
            let v_hat = v[i] / correct2;
            *theta -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
