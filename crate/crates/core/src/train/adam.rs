use super::{Result, TrainError};
use crate::model::Model;
use crate::tensor::Tensor;

pub const DEFAULT_LR: f32 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        AdamHyper { lr: DEFAULT_LR as f64, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update of a flat buffer at step `t` (1-based).
/// Moments are kept in f64; weights are stored back as f32.
pub fn adam_update(hp: &AdamHyper, t: u64, w: &mut [f32], g: &[f32], m: &mut [f64], v: &mut [f64]) -> Result<()> {
    if w.len() != g.len() || w.len() != m.len() || w.len() != v.len() {
        return Err(TrainError::Shape(format!(
            "adam buffers disagree: w {}, g {}, m {}, v {}",
            w.len(),
            g.len(),
            m.len(),
            v.len()
        )));
    }
    let c1 = 1.0 - hp.beta1.powi(t as i32);
    let c2 = 1.0 - hp.beta2.powi(t as i32);
    for i in 0..w.len() {
        let gi = g[i] as f64;
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * gi;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * gi * gi;
        let step = hp.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + hp.eps);
        let next = w[i] as f64 - step;
        if !next.is_finite() {
            return Err(TrainError::NonFinite(format!("adam update at index {i}")));
        }
        w[i] = next as f32;
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct Moments {
    name: String,
    shape: Vec<usize>,
    m: Vec<f64>,
    v: Vec<f64>,
}

/// Optimizer state aligned with a model's parameter list.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub hyper: AdamHyper,
    t: u64,
    moments: Vec<Moments>,
}

impl AdamState {
    pub fn new(model: &Model, lr: f32) -> Self {
        let moments = model
            .params()
            .iter()
            .map(|p| Moments {
                name: p.name.clone(),
                shape: p.tensor.shape().to_vec(),
                m: vec![0.0; p.tensor.len()],
                v: vec![0.0; p.tensor.len()],
            })
            .collect();
        AdamState { hyper: AdamHyper { lr: lr as f64, ..Default::default() }, t: 0, moments }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Updates every non-frozen parameter. `grads` follows the model's parameter
    /// order; entries for frozen parameters are ignored and may be `None`.
    pub fn step(&mut self, model: &mut Model, grads: &[Option<&Tensor>]) -> Result<()> {
        if grads.len() != self.moments.len() {
            return Err(TrainError::Shape(format!("{} gradients for {} parameters", grads.len(), self.moments.len())));
        }
        self.t += 1;
        let frozen: Vec<bool> = model.params().iter().map(|p| model.is_frozen(&p.name)).collect();
        for ((param, mo), (g, frozen)) in
            model.params_mut().iter_mut().zip(&mut self.moments).zip(grads.iter().zip(frozen))
        {
            if frozen {
                continue;
            }
            if param.name != mo.name || param.tensor.shape() != mo.shape.as_slice() {
                return Err(TrainError::Shape(format!(
                    "optimizer state for {} does not match {}",
                    mo.name, param.name
                )));
            }
            let g = g.ok_or_else(|| TrainError::Shape(format!("missing gradient for {}", param.name)))?;
            if g.shape() != mo.shape.as_slice() {
                return Err(TrainError::Shape(format!("gradient for {} has shape {:?}", param.name, g.shape())));
            }
            adam_update(&self.hyper, self.t, param.tensor.data_mut(), g.data(), &mut mo.m, &mut mo.v)?;
        }
        Ok(())
    }
}
