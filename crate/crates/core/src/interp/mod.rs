//! Gradient saliency, activation maximization and their renderings.

mod ascent;
mod render;
mod saliency;

use thiserror::Error;

use crate::data::DataError;
use crate::model::ModelError;
use crate::tensor::TensorError;

pub use ascent::{maximize_filter, AscentConfig, AscentResult};
pub use render::{colormap, filter_panel, render_heatmap, render_panel, FilterPanel, OVERLAY_ALPHA};
pub use saliency::{saliency, saliency_probe, LogitModel, SaliencyMap};

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("filter {index} out of range for {layer} ({count} filters)")]
    Filter { layer: String, index: usize, count: usize },
    #[error("no snapshot for epoch {0}")]
    MissingSnapshot(usize),
    #[error("grid of {cells} cells cannot hold {filters} filters")]
    Grid { cells: usize, filters: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
}

pub type Result<T> = std::result::Result<T, InterpError>;
