use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;

use super::{AdamState, Result, TrainError, DEFAULT_LR};
use crate::data::{augment, batch_tensor, AugmentParams, Label, SampleImage};
use crate::model::{Binding, Model};
use crate::rng::substream;
use crate::tensor::{Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Regime {
    /// Backbone loaded from the pretext checkpoint and frozen; only the head trains.
    Pretrained,
    /// Every layer trained from a fresh initialization.
    Retrained,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pretrained => "pretrained",
            Regime::Retrained => "retrained",
        }
    }

    pub fn parse(s: &str) -> Option<Regime> {
        match s {
            "pretrained" => Some(Regime::Pretrained),
            "retrained" => Some(Regime::Retrained),
            _ => None,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub regime: Regime,
    pub seed: u64,
    pub augment: AugmentParams,
    /// Epochs (1-based) after which a copy of the model is kept in the history.
    pub snapshot_epochs: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            batch_size: 2,
            lr: DEFAULT_LR,
            regime: Regime::Retrained,
            seed: 0,
            augment: AugmentParams::default(),
            snapshot_epochs: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(TrainError::Config(format!("learning rate {} must be finite and non-negative", self.lr)));
        }
        self.augment.validate()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainHistory {
    pub mean_loss: Vec<f64>,
    pub seconds: Vec<f64>,
    pub snapshots: Vec<(usize, Model)>,
}

impl TrainHistory {
    pub fn epochs(&self) -> usize {
        self.mean_loss.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss,seconds\n");
        for (i, (loss, secs)) in self.mean_loss.iter().zip(&self.seconds).enumerate() {
            let _ = writeln!(s, "{},{loss:.6},{secs:.3}", i + 1);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| TrainError::Io { path: path.to_path_buf(), source })
    }
}

fn labels(images: &[&SampleImage]) -> Tensor {
    Tensor::new(&[images.len(), 1], images.iter().map(|i| i.label.target()).collect()).expect("label shape")
}

/// Trains `model` on `train`, returning the updated model and per-epoch history.
///
/// Each epoch visits every sample exactly once in shuffled order; the final
/// short batch is kept. Augmentation is applied online, per batch.
pub fn fit(model: &Model, train: &[SampleImage], cfg: &TrainConfig) -> Result<(Model, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let loose = train.iter().filter(|i| i.label == Label::Loose).count();
    if loose == 0 || loose == train.len() {
        log::warn!("training set has a single class ({} images); proceeding", train.len());
    }
    match cfg.regime {
        Regime::Pretrained if !model.backbone_frozen() => {
            return Err(TrainError::Regime("pretrained regime requires a frozen backbone".into()));
        }
        Regime::Pretrained if model.provenance.regime != "pretext" && model.provenance.regime != "pretrained" => {
            return Err(TrainError::Regime(format!(
                "pretrained regime requires a backbone from a pretext checkpoint, model provenance is {:?}",
                model.provenance.regime
            )));
        }
        Regime::Retrained if !model.frozen().is_empty() => {
            return Err(TrainError::Regime("retrained regime trains every layer; unfreeze the model first".into()));
        }
        _ => {}
    }

    let mut model = model.clone();
    let mut history = TrainHistory::default();
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    let mut opt = AdamState::new(&model, cfg.lr);
    let mut shuffle_rng = substream(cfg.seed, "shuffle");
    let mut aug_rng = substream(cfg.seed, "augment");
    let mut drop_rng = substream(cfg.seed, "dropout");
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0f64;
        for chunk in order.chunks(cfg.batch_size) {
            let augmented: Vec<SampleImage> =
                chunk.iter().map(|&i| augment(&train[i], &cfg.augment, &mut aug_rng)).collect();
            let refs: Vec<&SampleImage> = augmented.iter().collect();
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape, Binding::Trainable)?;
            let x = tape.constant(batch_tensor(&refs))?;
            let y = tape.constant(labels(&refs))?;
            let logits = model.forward_tape(&mut tape, &vars, x, true, &mut drop_rng)?;
            let prob = tape.sigmoid(logits)?;
            let loss = tape.bce_loss(prob, y)?;
            loss_sum += tape.value(loss).item() as f64 * chunk.len() as f64;
            tape.backward(loss)?;
            let grads: Vec<Option<&Tensor>> = vars.iter().map(|&v| tape.grad(v)).collect();
            opt.step(&mut model, &grads)?;
        }
        let mean = loss_sum / train.len() as f64;
        let secs = start.elapsed().as_secs_f64();
        log::info!("{} epoch {epoch}/{}: loss {mean:.4} ({secs:.1}s)", cfg.regime, cfg.epochs);
        history.mean_loss.push(mean);
        history.seconds.push(secs);
        if cfg.snapshot_epochs.contains(&epoch) {
            history.snapshots.push((epoch, model.clone()));
        }
    }
    model.provenance.seed = cfg.seed;
    model.provenance.regime = cfg.regime.as_str().to_string();
    model.provenance.epochs += cfg.epochs;
    model.provenance.lr = cfg.lr;
    model.provenance.batch_size = cfg.batch_size;
    Ok((model, history))
}

/// Mean inference-mode binary cross-entropy over `images`.
pub fn mean_loss(model: &Model, images: &[SampleImage], batch_size: usize) -> Result<f64> {
    if images.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let refs: Vec<&SampleImage> = images.iter().collect();
    let mut sum = 0.0f64;
    for chunk in refs.chunks(batch_size.max(1)) {
        let logits = model.predict(&batch_tensor(chunk))?;
        for (img, &z) in chunk.iter().zip(logits.data()) {
            let p = (1.0 / (1.0 + (-z as f64).exp())).clamp(1e-7, 1.0 - 1e-7);
            let y = img.label.target() as f64;
            sum -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
        }
    }
    Ok(sum / images.len() as f64)
}
