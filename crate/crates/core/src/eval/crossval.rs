use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;

use super::metrics::{accuracy, sensitivity, specificity, ConfusionCounts, Metric};
use super::roc::{average_curves, roc_curve, trapezoid, RocCurve};
use super::{make_folds, EvalError, Result};
use crate::data::{batch_tensor, Label, SampleImage};
use crate::model::{DenseNetConfig, Init, Model, DEFAULT_INIT_STD};
use crate::rng::derive_seed;
use crate::train::{fit, mean_loss, Regime, TrainConfig, TrainHistory};

#[derive(Clone, Debug)]
pub struct CrossValConfig {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub model: DenseNetConfig,
    /// Regime, epochs, batch size, learning rate and augmentation. The seed is
    /// replaced per fold.
    pub train: TrainConfig,
    /// Pretext backbone checkpoint; required for the pretrained regime.
    pub backbone: Option<PathBuf>,
    /// Worker threads for folds; 1 runs them in order on the caller's thread.
    pub jobs: usize,
    /// Classification threshold on the sigmoid output.
    pub threshold: f64,
}

impl Default for CrossValConfig {
    fn default() -> Self {
        CrossValConfig {
            k: 5,
            seed: 0,
            stratified: true,
            model: DenseNetConfig::default(),
            train: TrainConfig::default(),
            backbone: None,
            jobs: 1,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub validation_ids: Vec<String>,
    /// Sigmoid outputs, aligned with `validation_ids`.
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub counts: ConfusionCounts,
    /// Absent when the validation fold holds a single class.
    pub roc: Option<RocCurve>,
    pub validation_loss: f64,
    pub history: TrainHistory,
    /// Weights after the last epoch.
    pub model: Model,
}

impl FoldResult {
    pub fn auc(&self) -> Metric {
        self.roc.as_ref().map_or(Metric::Undefined, |r| Metric::Defined(r.auc))
    }

    pub fn sensitivity(&self) -> Metric {
        sensitivity(&self.counts)
    }

    pub fn specificity(&self) -> Metric {
        specificity(&self.counts)
    }

    pub fn accuracy(&self) -> Metric {
        accuracy(&self.counts)
    }
}

#[derive(Clone, Debug)]
pub struct FoldReport {
    pub regime: Regime,
    pub seed: u64,
    pub k: usize,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the defined per-fold AUCs.
    pub mean_auc: Metric,
    pub mean_curve: Vec<(f64, f64)>,
    pub mean_validation_loss: f64,
}

impl FoldReport {
    pub fn pooled_counts(&self) -> ConfusionCounts {
        self.folds.iter().fold(ConfusionCounts::default(), |acc, f| acc.merge(&f.counts))
    }

    pub fn mean_curve_auc(&self) -> f64 {
        trapezoid(&self.mean_curve)
    }
}

fn sigmoid(z: f32) -> f64 {
    1.0 / (1.0 + (-(z as f64)).exp())
}

fn initial_model(cv: &CrossValConfig, fold: usize) -> Result<Model> {
    let seed = derive_seed(cv.seed, "fold.init", fold as u64);
    let model = match cv.train.regime {
        Regime::Pretrained => {
            let path = cv
                .backbone
                .clone()
                .ok_or_else(|| EvalError::Input("pretrained regime needs a pretext backbone checkpoint".into()))?;
            let mut m = Model::build(cv.model.clone(), Init::FromCheckpoint { path, seed })?;
            m.freeze_backbone();
            m
        }
        Regime::Retrained => Model::build(cv.model.clone(), Init::Gaussian { seed, std: DEFAULT_INIT_STD })?,
    };
    Ok(model)
}

fn run_fold(
    dataset: &[SampleImage],
    cv: &CrossValConfig,
    fold: usize,
    train_idx: &[usize],
    val_idx: &[usize],
) -> Result<FoldResult> {
    let train_ids: HashSet<&str> = train_idx.iter().map(|&i| dataset[i].id.as_str()).collect();
    assert!(
        val_idx.iter().all(|&i| !train_ids.contains(dataset[i].id.as_str())),
        "fold {fold}: validation sample also used for training"
    );
    let train_set: Vec<SampleImage> = train_idx.iter().map(|&i| dataset[i].clone()).collect();
    let val_set: Vec<SampleImage> = val_idx.iter().map(|&i| dataset[i].clone()).collect();

    let annotate = |e: EvalError| EvalError::Fold { fold, source: Box::new(e) };
    let model = initial_model(cv, fold).map_err(annotate)?;
    let tcfg = TrainConfig { seed: derive_seed(cv.seed, "fold.train", fold as u64), ..cv.train.clone() };
    let (model, history) = fit(&model, &train_set, &tcfg).map_err(|e| annotate(e.into()))?;

    let mut scores = Vec::with_capacity(val_set.len());
    for chunk in val_set.chunks(32) {
        let refs: Vec<&SampleImage> = chunk.iter().collect();
        let logits = model.predict(&batch_tensor(&refs)).map_err(|e| annotate(e.into()))?;
        scores.extend(logits.data().iter().map(|&z| sigmoid(z)));
    }
    let labels: Vec<bool> = val_set.iter().map(|i| i.label == Label::Loose).collect();
    let counts = ConfusionCounts::at_threshold(&scores, &labels, cv.threshold);
    let roc = match roc_curve(&scores, &labels) {
        Ok(r) => Some(r),
        Err(EvalError::SingleClass { .. }) => {
            log::warn!("fold {fold}: validation set holds a single class; AUC undefined");
            None
        }
        Err(e) => return Err(annotate(e)),
    };
    let validation_loss = mean_loss(&model, &val_set, 32).map_err(|e| annotate(e.into()))?;
    log::info!(
        "{} fold {fold}: auc {:.3} sens {:.3} spec {:.3} val loss {validation_loss:.4}",
        cv.train.regime,
        roc.as_ref().map_or(f64::NAN, |r| r.auc),
        sensitivity(&counts),
        specificity(&counts)
    );
    Ok(FoldResult {
        fold,
        validation_ids: val_set.iter().map(|i| i.id.clone()).collect(),
        scores,
        labels,
        counts,
        roc,
        validation_loss,
        history,
        model,
    })
}

/// Trains one model per fold and scores its held-out fold once.
pub fn cross_validate(dataset: &[SampleImage], cv: &CrossValConfig) -> Result<FoldReport> {
    let mut ids = HashSet::new();
    if let Some(dup) = dataset.iter().find(|i| !ids.insert(i.id.as_str())) {
        return Err(EvalError::Input(format!("duplicate sample id {}", dup.id)));
    }
    let labels: Vec<Label> = dataset.iter().map(|i| i.label).collect();
    let split = make_folds(&labels, cv.k, cv.seed, cv.stratified)?;
    let work: Vec<(usize, Vec<usize>)> = (0..cv.k).map(|f| (f, split.train(f))).collect();
    let run = |(f, train): &(usize, Vec<usize>)| run_fold(dataset, cv, *f, train, &split.validation[*f]);
    let folds: Vec<FoldResult> = if cv.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cv.jobs)
            .build()
            .map_err(|e| EvalError::Input(format!("thread pool: {e}")))?;
        pool.install(|| work.par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        work.iter().map(run).collect::<Result<Vec<_>>>()?
    };

    let mean_auc = Metric::mean(folds.iter().map(FoldResult::auc));
    let curves: Vec<&RocCurve> = folds.iter().filter_map(|f| f.roc.as_ref()).collect();
    let mean_curve = average_curves(&curves);
    let mean_validation_loss = folds.iter().map(|f| f.validation_loss).sum::<f64>() / folds.len() as f64;
    Ok(FoldReport {
        regime: cv.train.regime,
        seed: cv.seed,
        k: cv.k,
        folds,
        mean_auc,
        mean_curve,
        mean_validation_loss,
    })
}
