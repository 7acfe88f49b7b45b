//! Adam, the supervised training loop and backbone pretraining on a pretext task.

mod adam;
mod fit;
mod pretext;

use std::path::PathBuf;

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use adam::{adam_update, AdamHyper, AdamState, DEFAULT_LR};
pub use fit::{fit, mean_loss, Regime, TrainConfig, TrainHistory};
pub use pretext::{generate_pretext, pretext_pretrain, PretextConfig, PretextReport};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{0}")]
    Regime(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, TrainError>;
