//! Dense `f32` tensors and a reverse-mode autodiff tape.
//!
//! Values live on a [`Tape`]; every differentiable operation records its
//! inputs so that [`Tape::backward`] can replay the chain rule in reverse.
//! Forward kernels are generic over the float type, which lets the
//! gradient checker re-evaluate a recorded graph in `f64`.

mod gradcheck;
mod kernels;
mod tape;

pub use gradcheck::{grad_check, grad_check_with, GradCheckOptions, GradCheckReport, MAX_GRAD_CHECK_PARAMS};
pub use tape::{Tape, Var};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TensorError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: zero-size output ({detail})")]
    EmptyOutput { op: &'static str, detail: String },
    #[error("{op}: non-finite value in {tensor}")]
    NonFinite { op: &'static str, tensor: &'static str },
    #[error("dropout: rate {0} outside [0, 1)")]
    DropoutRate(f32),
    #[error("bce_loss: label {0} is not 0 or 1")]
    Label(f32),
    #[error("backward: root must be a scalar, got shape {0:?}")]
    NonScalarRoot(Vec<usize>),
    #[error("backward: root does not depend on any tensor that requires grad")]
    Detached,
    #[error("backward already ran on this tape; call reset_grads first")]
    BackwardTwice,
    #[error("grad_check: {0} coordinates exceeds the limit of {1}")]
    TooManyParameters(usize, usize),
}

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major N-dimensional array of `f32`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(TensorError::Shape {
                op: "tensor",
                detail: format!("dimensions must be positive, got {shape:?}"),
            });
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::Shape {
                op: "tensor",
                detail: format!("shape {shape:?} needs {expected} values, got {}", data.len()),
            });
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f32) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![value; n] }
    }

    pub fn scalar(value: f32) -> Self {
        Tensor { shape: vec![1], data: vec![value] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    pub fn item(&self) -> f32 {
        self.data[0]
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        Tensor::new(shape, self.data.clone())
    }

    /// Copies channels `start..start + count` of an `[N, C, H, W]` tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Result<Tensor> {
        let [n, c, h, w] = dims4("slice_channels", &self.shape)?;
        if count == 0 || start + count > c {
            return Err(TensorError::Shape {
                op: "slice_channels",
                detail: format!("channels {start}..{} of {c}", start + count),
            });
        }
        let hw = h * w;
        let mut out = Vec::with_capacity(n * count * hw);
        for b in 0..n {
            let base = (b * c + start) * hw;
            out.extend_from_slice(&self.data[base..base + count * hw]);
        }
        Tensor::new(&[n, count, h, w], out)
    }

    pub fn ensure_finite(&self, op: &'static str, tensor: &'static str) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(TensorError::NonFinite { op, tensor })
        }
    }
}

pub(crate) fn dims4(op: &'static str, shape: &[usize]) -> Result<[usize; 4]> {
    match *shape {
        [n, c, h, w] => Ok([n, c, h, w]),
        _ => Err(TensorError::Shape { op, detail: format!("expected 4-d [N,C,H,W], got {shape:?}") }),
    }
}

pub(crate) fn dims2(op: &'static str, shape: &[usize]) -> Result<[usize; 2]> {
    match *shape {
        [a, b] => Ok([a, b]),
        _ => Err(TensorError::Shape { op, detail: format!("expected 2-d, got {shape:?}") }),
    }
}
