use super::{InterpError, Result};
use crate::data::SampleImage;
use crate::model::{Binding, Model};
use crate::rng::substream;
use crate::tensor::{Tape, Tensor, Var};

/// Anything that maps a `[1, 1, H, W]` input leaf to a scalar logit on a tape.
pub trait LogitModel {
    /// (height, width) of the expected input.
    fn input_dims(&self) -> (usize, usize);
    fn record_logit(&self, tape: &mut Tape, input: Var) -> Result<Var>;
    /// Identifies the weights a map was computed with.
    fn fingerprint(&self) -> String;
    fn epochs(&self) -> usize;
}

impl LogitModel for Model {
    fn input_dims(&self) -> (usize, usize) {
        (self.config().input_size, self.config().input_size)
    }

    fn record_logit(&self, tape: &mut Tape, input: Var) -> Result<Var> {
        let vars = self.bind(tape, Binding::Fixed)?;
        let mut unused = substream(0, "unused");
        let logits = self.forward_tape(tape, &vars, input, false, &mut unused)?;
        Ok(tape.sum(logits)?)
    }

    fn fingerprint(&self) -> String {
        Model::fingerprint(self)
    }

    fn epochs(&self) -> usize {
        self.provenance.epochs
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaliencyMap {
    pub width: usize,
    pub height: usize,
    /// |d logit / d pixel|, row-major.
    pub values: Vec<f32>,
    pub image_id: String,
    pub model_fingerprint: String,
    pub epoch: usize,
}

impl SaliencyMap {
    pub fn max(&self) -> f32 {
        self.values.iter().copied().fold(0.0, f32::max)
    }

    /// Values divided by the maximum; all zeros when the maximum is zero.
    pub fn normalized(&self) -> Vec<f32> {
        let m = self.max();
        if m > 0.0 {
            self.values.iter().map(|v| v / m).collect()
        } else {
            vec![0.0; self.values.len()]
        }
    }

    /// Indices of the `ceil(frac * N)` largest values, ties broken by index.
    pub fn top_indices(&self, frac: f64) -> Vec<usize> {
        let k = ((self.values.len() as f64 * frac).ceil() as usize).clamp(1, self.values.len());
        let mut idx: Vec<usize> = (0..self.values.len()).collect();
        idx.sort_by(|&a, &b| self.values[b].total_cmp(&self.values[a]).then(a.cmp(&b)));
        idx.truncate(k);
        idx
    }

    /// Fraction of the top `frac` pixels that fall inside `mask`.
    pub fn top_fraction_in(&self, mask: &[bool], frac: f64) -> f64 {
        let top = self.top_indices(frac);
        top.iter().filter(|&&i| mask[i]).count() as f64 / top.len() as f64
    }
}

/// Gradient magnitude of the logit with respect to each input pixel, at inference.
pub fn saliency<M: LogitModel + ?Sized>(model: &M, image: &SampleImage) -> Result<SaliencyMap> {
    let (h, w) = model.input_dims();
    if (image.height, image.width) != (h, w) {
        return Err(InterpError::Shape(format!(
            "image {} is {}x{}, model expects {w}x{h}",
            image.id, image.width, image.height
        )));
    }
    let mut tape = Tape::new();
    let x = tape.leaf(Tensor::new(&[1, 1, h, w], image.pixels.clone())?, true)?;
    let logit = model.record_logit(&mut tape, x)?;
    tape.backward(logit)?;
    let grad = tape.grad(x).expect("input requires grad");
    Ok(SaliencyMap {
        width: w,
        height: h,
        values: grad.data().iter().map(|g| g.abs()).collect(),
        image_id: image.id.clone(),
        model_fingerprint: model.fingerprint(),
        epoch: model.epochs(),
    })
}

/// One map per requested epoch, taken from training snapshots `(epoch, model)`.
pub fn saliency_probe(snapshots: &[(usize, Model)], epochs: &[usize], image: &SampleImage) -> Result<Vec<SaliencyMap>> {
    epochs
        .iter()
        .map(|&e| {
            let (_, model) = snapshots.iter().find(|(se, _)| *se == e).ok_or(InterpError::MissingSnapshot(e))?;
            let mut map = saliency(model, image)?;
            map.epoch = e;
            Ok(map)
        })
        .collect()
}
