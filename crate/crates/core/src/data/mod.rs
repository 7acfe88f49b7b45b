//! Synthetic radiographs, augmentation, raster I/O and dataset manifests.

mod augment;
mod manifest;
pub mod pnm;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::tensor::Tensor;

pub use augment::{apply_transform, augment, AugmentParams, Transform};
pub(crate) use manifest::mask_path;
pub use manifest::{load_dataset, read_manifest, write_dataset, write_manifest, ManifestRecord};
pub(crate) use synth::smooth_noise;
pub use synth::{generate_dataset, ring_contrast, Range, SynthParams};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: malformed image: {msg}")]
    Image { path: PathBuf, msg: String },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: u64, msg: String },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("geometry exits the frame after {0} attempts")]
    Geometry(usize),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Loose,
    WellFixed,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Loose => "loose",
            Label::WellFixed => "well_fixed",
        }
    }

    /// Exact token match; no trimming or case folding.
    pub fn parse(token: &str) -> Option<Label> {
        match token {
            "loose" => Some(Label::Loose),
            "well_fixed" => Some(Label::WellFixed),
            _ => None,
        }
    }

    /// Loose is the positive class.
    pub fn target(self) -> f32 {
        match self {
            Label::Loose => 1.0,
            Label::WellFixed => 0.0,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grayscale image in `[0, 1]`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleImage {
    pub id: String,
    pub label: Label,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f32>,
    /// Ground-truth lucency band (synthetic images only).
    pub lucency_mask: Option<Vec<bool>>,
}

impl SampleImage {
    pub fn new(id: impl Into<String>, label: Label, width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        let img = SampleImage { id: id.into(), label, width, height, pixels, lucency_mask: None };
        img.validate()?;
        Ok(img)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.pixels.len() != self.width * self.height {
            return Err(DataError::Params(format!(
                "{}: {} pixels for {}x{}",
                self.id,
                self.pixels.len(),
                self.width,
                self.height
            )));
        }
        if let Some(bad) = self.pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DataError::Params(format!("{}: pixel {bad} outside [0, 1]", self.id)));
        }
        if let Some(mask) = &self.lucency_mask {
            if mask.len() != self.pixels.len() {
                return Err(DataError::Params(format!("{}: mask size differs from image", self.id)));
            }
        }
        Ok(())
    }

    pub fn mask_area(&self) -> usize {
        self.lucency_mask.as_ref().map_or(0, |m| m.iter().filter(|&&b| b).count())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::new(&[1, 1, self.height, self.width], self.pixels.clone()).expect("validated image")
    }
}

/// Stacks images into a `[N, 1, H, W]` batch.
pub fn batch_tensor(images: &[&SampleImage]) -> Tensor {
    let (h, w) = (images[0].height, images[0].width);
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        assert_eq!((img.height, img.width), (h, w), "batch images must share a size");
        data.extend_from_slice(&img.pixels);
    }
    Tensor::new(&[images.len(), 1, h, w], data).expect("batch shape")
}
