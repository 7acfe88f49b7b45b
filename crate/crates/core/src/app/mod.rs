//! Command implementations behind the `lucenet` binary. Each command writes
//! into the run's output directory and reports failures as an [`AppError`]
//! that maps onto a process exit code.

mod commands;
mod config;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::data::DataError;
use crate::eval::EvalError;
use crate::interp::InterpError;
use crate::model::ModelError;
use crate::train::TrainError;

pub use commands::{cmd_crossval, cmd_filters, cmd_pretrain, cmd_saliency, cmd_synth, CrossvalSummary};
pub use config::{RegimeChoice, RunConfig};

#[derive(Debug, Error)]
pub enum AppError {
    #[error("unknown config key {key:?} (line {line})")]
    UnknownKey { key: String, line: usize },
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {path}: {msg}")]
    MissingInput { path: PathBuf, msg: String },
    #[error("fold {fold}: {msg}")]
    Fold { fold: usize, msg: String },
    #[error("{0}")]
    Runtime(String),
}

impl AppError {
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::UnknownKey { .. } | AppError::Config(_) => 2,
            AppError::MissingInput { .. } => 3,
            AppError::Fold { .. } | AppError::Runtime(_) => 4,
        }
    }

    pub(crate) fn missing(path: &Path, e: impl std::fmt::Display) -> Self {
        AppError::MissingInput { path: path.to_path_buf(), msg: e.to_string() }
    }

    pub(crate) fn runtime(e: impl std::fmt::Display) -> Self {
        AppError::Runtime(e.to_string())
    }
}

impl From<EvalError> for AppError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Fold { fold, source } => AppError::Fold { fold, msg: source.to_string() },
            e => AppError::runtime(e),
        }
    }
}

impl From<DataError> for AppError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Params(m) => AppError::Config(m),
            e => AppError::runtime(e),
        }
    }
}

impl From<ModelError> for AppError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Config(m) => AppError::Config(m),
            e => AppError::runtime(e),
        }
    }
}

impl From<TrainError> for AppError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(m) => AppError::Config(m),
            e => AppError::runtime(e),
        }
    }
}

impl From<InterpError> for AppError {
    fn from(e: InterpError) -> Self {
        match e {
            InterpError::Config(m) => AppError::Config(m),
            e => AppError::runtime(e),
        }
    }
}
