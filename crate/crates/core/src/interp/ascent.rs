use rand::Rng;

use super::{InterpError, Result};
use crate::model::{Binding, Model};
use crate::rng::substream_indexed;
use crate::tensor::{Tape, Tensor};

const MAX_HALVINGS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct AscentConfig {
    pub steps: usize,
    /// Initial step along the max-normalized gradient; halved until the objective does not drop.
    pub step_size: f32,
    /// Shrinks the input towards zero each step.
    pub weight_decay: f32,
    pub init_low: f32,
    pub init_high: f32,
    pub seed: u64,
    /// Minimizes the activation instead (control run).
    pub negate: bool,
}

impl Default for AscentConfig {
    fn default() -> Self {
        AscentConfig {
            steps: 128,
            step_size: 0.1,
            weight_decay: 1e-3,
            init_low: 0.4,
            init_high: 0.6,
            seed: 0,
            negate: false,
        }
    }
}

impl AscentConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.steps > 0 && self.step_size > 0.0 && self.weight_decay >= 0.0;
        if !ok {
            return Err(InterpError::Config(format!(
                "steps >= 1, step_size > 0 and weight_decay >= 0 required: {self:?}"
            )));
        }
        if !(0.0 <= self.init_low && self.init_low <= self.init_high && self.init_high <= 1.0) {
            return Err(InterpError::Config(format!(
                "init range [{}, {}] outside [0, 1]",
                self.init_low, self.init_high
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AscentResult {
    pub layer: String,
    pub filter: usize,
    pub width: usize,
    pub height: usize,
    pub image: Vec<f32>,
    /// Mean pre-activation of the filter map: the noise start, then one entry per step.
    /// Non-decreasing, or non-increasing when `negate` is set.
    pub trace: Vec<f64>,
}

impl AscentResult {
    pub fn initial(&self) -> f64 {
        self.trace[0]
    }

    pub fn last(&self) -> f64 {
        *self.trace.last().expect("non-empty trace")
    }
}

struct Objective<'a> {
    model: &'a Model,
    layer: String,
    filter: usize,
    size: usize,
}

impl Objective<'_> {
    /// Mean activation and, optionally, its input gradient.
    fn eval(&self, x: &[f32], want_grad: bool) -> Result<(f64, Option<Vec<f32>>)> {
        let mut tape = Tape::new();
        let vars = self.model.bind(&mut tape, Binding::Fixed)?;
        let input = tape.leaf(Tensor::new(&[1, 1, self.size, self.size], x.to_vec())?, want_grad)?;
        let out = self.model.conv_output(&mut tape, &vars, input, &self.layer)?;
        let act = tape.channel_mean(out, self.filter)?;
        let value = tape.value(act).item() as f64;
        if !want_grad {
            return Ok((value, None));
        }
        tape.backward(act)?;
        Ok((value, Some(tape.grad(input).expect("input requires grad").data().to_vec())))
    }
}

/// Gradient ascent on the input image to maximize one filter's mean response.
pub fn maximize_filter(model: &Model, layer: &str, filter: usize, cfg: &AscentConfig) -> Result<AscentResult> {
    cfg.validate()?;
    let spec = model.resolve_conv(layer)?;
    if filter >= spec.filters {
        return Err(InterpError::Filter { layer: spec.name, index: filter, count: spec.filters });
    }
    let size = model.config().input_size;
    let obj = Objective { model, layer: spec.name.clone(), filter, size };
    let sign = if cfg.negate { -1.0f32 } else { 1.0 };

    let mut rng = substream_indexed(cfg.seed, &format!("ascent.{}", spec.name), filter as u64);
    let mut x: Vec<f32> = (0..size * size)
        .map(|_| if cfg.init_high > cfg.init_low { rng.gen_range(cfg.init_low..=cfg.init_high) } else { cfg.init_low })
        .collect();
    let (mut current, _) = obj.eval(&x, false)?;
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    trace.push(current);
    let improves = |new: f64, old: f64| if cfg.negate { new <= old } else { new >= old };

    for _ in 0..cfg.steps {
        let (_, grad) = obj.eval(&x, true)?;
        let grad = grad.expect("gradient requested");
        let scale = grad.iter().fold(0.0f32, |m, g| m.max(g.abs()));
        if scale > 0.0 {
            let mut eta = cfg.step_size;
            for _ in 0..=MAX_HALVINGS {
                let cand: Vec<f32> = x
                    .iter()
                    .zip(&grad)
                    .map(|(&v, &g)| (v + eta * sign * g / scale - eta * cfg.weight_decay * v).clamp(0.0, 1.0))
                    .collect();
                let (value, _) = obj.eval(&cand, false)?;
                if improves(value, current) {
                    x = cand;
                    current = value;
                    break;
                }
                eta *= 0.5;
            }
        }
        trace.push(current);
    }
    Ok(AscentResult { layer: spec.name, filter, width: size, height: size, image: x, trace })
}
