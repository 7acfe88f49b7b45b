//! Cross-validation, confusion metrics, ROC construction and reporting.

mod crossval;
mod folds;
mod metrics;
mod report;
mod roc;

use thiserror::Error;

use crate::model::ModelError;
use crate::train::TrainError;

pub use crossval::{cross_validate, CrossValConfig, FoldReport, FoldResult};
pub use folds::{make_folds, FoldSplit};
pub use metrics::{accuracy, sensitivity, specificity, ConfusionCounts, Metric};
pub use report::{curve_csv, pooled_csv, predictions_csv, report_csv, roc_svg, ReaderPoint};
pub use roc::{
    average_curves, interpolate_tpr, pairwise_auc, roc_curve, threshold_at_specificity, trapezoid, OperatingPoint,
    RocCurve, GRID_POINTS,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fold {fold}: {source}")]
    Fold { fold: usize, source: Box<EvalError> },
    #[error("cannot split: {0}")]
    Folds(String),
    #[error("ROC needs both classes (positives {positives}, negatives {negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
