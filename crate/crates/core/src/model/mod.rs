//! The miniature DenseNet: parameter store, forward pass, freezing and
//! checkpoint persistence.
//!
//! Layout: `conv3x3 -> relu -> avgpool2` stem, dense blocks where each
//! layer sees the concatenation of every earlier feature map in its block,
//! `conv1x1 -> relu -> avgpool2` transitions between blocks, global average
//! pooling, then the fixed classifier head
//! `dense(512) -> relu -> dense(256) -> relu -> dense(256) -> relu -> dropout(0.3) -> dense(1)`.

mod checkpoint;
mod config;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::rng::{self, Stream};
use crate::tensor::{Tape, Tensor, TensorError, Var};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC, FORMAT_VERSION};
pub use config::{ConvSpec, DenseNetConfig, HEAD_DIMS, HEAD_DROPOUT};

/// Standard deviation of the Gaussian used for re-trained backbones and every head.
pub const DEFAULT_INIT_STD: f32 = 0.05;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint format version mismatch: found {found}, expected {FORMAT_VERSION}")]
    VersionMismatch { found: String },
    #[error("truncated payload: {0}")]
    Truncated(String),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("shape disagreement for {name}: expected {expected:?}, found {found:?}")]
    ShapeDisagreement { name: String, expected: Vec<usize>, found: Vec<usize> },
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("input shape {found:?} does not match expected [N, 1, {size}, {size}]")]
    InputShape { found: Vec<usize>, size: usize },
    #[error("unknown layer {0:?}")]
    UnknownLayer(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Part {
    Backbone,
    Head,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub part: Part,
    pub tensor: Tensor,
}

/// Where the weights came from and how far they were trained.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Provenance {
    pub seed: u64,
    pub regime: String,
    pub epochs: usize,
    pub lr: f32,
    pub batch_size: usize,
}

/// Conv kernels are `[out, in, k, k]`, dense weights `[in, out]`.
fn fan_in(shape: &[usize]) -> usize {
    match shape {
        [fan, _] => *fan,
        _ => shape[1..].iter().product(),
    }
}

#[derive(Clone, Debug)]
pub enum Init {
    /// Every weight from N(0, std²); biases zero.
    Gaussian { seed: u64, std: f32 },
    /// Every weight from N(0, 2 / fan_in); biases zero.
    FanIn { seed: u64 },
    /// Parameters present in the checkpoint are copied; the rest (normally
    /// the head) are drawn from N(0, 0.05²).
    FromCheckpoint { path: PathBuf, seed: u64 },
}

/// How parameters enter a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binding {
    /// Non-frozen parameters require gradients.
    Trainable,
    /// Nothing requires gradients (inference, saliency, filter ascent).
    Fixed,
}

#[derive(Clone, Debug)]
pub struct Model {
    config: DenseNetConfig,
    params: Vec<Param>,
    index: HashMap<String, usize>,
    frozen: BTreeSet<String>,
    pub provenance: Provenance,
}

impl PartialEq for Model {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params && self.provenance == other.provenance
    }
}

/// Named parameter shapes in their canonical order.
fn param_layout(config: &DenseNetConfig) -> Vec<(String, Part, Vec<usize>)> {
    let mut out = Vec::new();
    for conv in config.conv_plan() {
        out.push((
            format!("{}.weight", conv.name),
            Part::Backbone,
            vec![conv.filters, conv.in_channels, conv.kernel, conv.kernel],
        ));
        out.push((format!("{}.bias", conv.name), Part::Backbone, vec![conv.filters]));
    }
    for (name, d_in, d_out) in config.head_plan() {
        out.push((format!("{name}.weight"), Part::Head, vec![d_in, d_out]));
        out.push((format!("{name}.bias"), Part::Head, vec![d_out]));
    }
    out
}

fn gaussian(shape: &[usize], std: f32, rng: &mut Stream) -> Tensor {
    let normal = Normal::new(0.0f32, std).expect("positive std");
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| normal.sample(rng)).collect()).expect("shape product")
}

impl Model {
    pub fn build(config: DenseNetConfig, init: Init) -> Result<Model> {
        config.validate()?;
        let layout = param_layout(&config);
        let (seed, loaded) = match &init {
            Init::Gaussian { seed, .. } | Init::FanIn { seed } => (*seed, None),
            Init::FromCheckpoint { path, seed } => {
                let ckpt = read_checkpoint(path)?;
                ckpt.ensure_compatible(&config)?;
                (*seed, Some(ckpt))
            }
        };
        let mut stream = rng::substream(seed, "init");
        let mut loaded_params: HashMap<String, Tensor> = HashMap::new();
        let mut provenance = Provenance { seed, ..Default::default() };
        if let Some(ckpt) = loaded {
            provenance = ckpt.provenance;
            for (name, tensor) in ckpt.params {
                loaded_params.insert(name, tensor);
            }
        }
        let mut params = Vec::with_capacity(layout.len());
        for (name, part, shape) in &layout {
            let tensor = if let Some(t) = loaded_params.remove(name) {
                if t.shape() != shape.as_slice() {
                    return Err(ModelError::ShapeDisagreement {
                        name: name.clone(),
                        expected: shape.clone(),
                        found: t.shape().to_vec(),
                    });
                }
                t
            } else if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let std = match (&init, part) {
                    (Init::Gaussian { std, .. }, _) => *std,
                    (Init::FanIn { .. }, _) => (2.0 / fan_in(shape) as f32).sqrt(),
                    _ => DEFAULT_INIT_STD,
                };
                gaussian(shape, std, &mut stream)
            };
            params.push(Param { name: name.clone(), part: *part, tensor });
        }
        if let Some(name) = loaded_params.into_keys().min() {
            return Err(ModelError::UnknownParameter(name));
        }
        Self::assemble(config, params, provenance)
    }

    pub(crate) fn assemble(config: DenseNetConfig, params: Vec<Param>, provenance: Provenance) -> Result<Model> {
        let index = params.iter().enumerate().map(|(i, p)| (p.name.clone(), i)).collect();
        let model = Model { config, params, index, frozen: BTreeSet::new(), provenance };
        model.audit()?;
        Ok(model)
    }

    /// Verifies every parameter against the config's layer recipe.
    pub fn audit(&self) -> Result<()> {
        let layout = param_layout(&self.config);
        if layout.len() != self.params.len() {
            let have: BTreeSet<&str> = self.params.iter().map(|p| p.name.as_str()).collect();
            let missing = layout.iter().find(|(n, ..)| !have.contains(n.as_str()));
            return Err(match missing {
                Some((n, ..)) => ModelError::MissingParameter(n.clone()),
                None => ModelError::Config(format!("expected {} parameters, have {}", layout.len(), self.params.len())),
            });
        }
        for ((name, part, shape), p) in layout.iter().zip(&self.params) {
            if &p.name != name || &p.part != part {
                return Err(ModelError::Config(format!("parameter order: expected {name}, found {}", p.name)));
            }
            if p.tensor.shape() != shape.as_slice() {
                return Err(ModelError::ShapeDisagreement {
                    name: name.clone(),
                    expected: shape.clone(),
                    found: p.tensor.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn config(&self) -> &DenseNetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.params[i].tensor)
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    pub fn names(&self, part: Part) -> Vec<&str> {
        self.params.iter().filter(|p| p.part == part).map(|p| p.name.as_str()).collect()
    }

    pub fn frozen(&self) -> &BTreeSet<String> {
        &self.frozen
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    pub fn freeze_backbone(&mut self) -> &mut Self {
        self.frozen = self.names(Part::Backbone).into_iter().map(String::from).collect();
        self
    }

    pub fn unfreeze_all(&mut self) -> &mut Self {
        self.frozen.clear();
        self
    }

    pub fn backbone_frozen(&self) -> bool {
        let backbone = self.names(Part::Backbone);
        self.frozen.len() == backbone.len() && backbone.iter().all(|n| self.frozen.contains(*n))
    }

    pub fn first_conv(&self) -> ConvSpec {
        self.config.conv_plan().remove(0)
    }

    /// Last convolution of the last dense block.
    pub fn last_conv(&self) -> ConvSpec {
        self.config.conv_plan().pop().expect("non-empty plan")
    }

    /// Resolves `first`, `last` or a full conv layer name such as `block1.layer2.conv`.
    pub fn resolve_conv(&self, layer: &str) -> Result<ConvSpec> {
        match layer {
            "first" => Ok(self.first_conv()),
            "last" => Ok(self.last_conv()),
            name => self
                .config
                .conv_plan()
                .into_iter()
                .find(|c| c.name == name)
                .ok_or_else(|| ModelError::UnknownLayer(name.to_string())),
        }
    }

    /// Adds every parameter to `tape` as a leaf, in canonical order.
    pub fn bind(&self, tape: &mut Tape, binding: Binding) -> Result<Vec<Var>> {
        self.params
            .iter()
            .map(|p| {
                let trainable = binding == Binding::Trainable && !self.frozen.contains(&p.name);
                Ok(tape.leaf(p.tensor.clone(), trainable)?)
            })
            .collect()
    }

    fn var(&self, vars: &[Var], name: &str) -> Var {
        vars[self.index[name]]
    }

    fn conv(&self, tape: &mut Tape, vars: &[Var], spec: &ConvSpec, x: Var) -> Result<Var> {
        let w = self.var(vars, &format!("{}.weight", spec.name));
        let b = self.var(vars, &format!("{}.bias", spec.name));
        Ok(tape.conv2d(x, w, b, 1, spec.kernel / 2)?)
    }

    fn check_input(&self, shape: &[usize]) -> Result<()> {
        let s = self.config.input_size;
        match shape {
            [_, 1, h, w] if *h == s && *w == s => Ok(()),
            _ => Err(ModelError::InputShape { found: shape.to_vec(), size: s }),
        }
    }

    /// Records the forward pass; returns logits `[N, 1]`.
    pub fn forward_tape(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        input: Var,
        training: bool,
        rng: &mut Stream,
    ) -> Result<Var> {
        self.run(tape, vars, input, training, rng, None)
    }

    /// Records the backbone up to `layer` and returns that convolution's
    /// pre-activation output `[N, filters, H, W]`.
    pub fn conv_output(&self, tape: &mut Tape, vars: &[Var], input: Var, layer: &str) -> Result<Var> {
        let spec = self.resolve_conv(layer)?;
        let mut unused = rng::substream(0, "unused");
        self.run(tape, vars, input, false, &mut unused, Some(&spec.name))
    }

    fn run(
        &self,
        tape: &mut Tape,
        vars: &[Var],
        input: Var,
        training: bool,
        rng: &mut Stream,
        stop: Option<&str>,
    ) -> Result<Var> {
        self.check_input(tape.shape(input))?;
        let plan = self.config.conv_plan();
        let mut specs = plan.iter();

        let stem = specs.next().expect("stem");
        let y = self.conv(tape, vars, stem, input)?;
        if stop == Some(stem.name.as_str()) {
            return Ok(y);
        }
        let y = tape.relu(y)?;
        let mut features = tape.avg_pool2d(y, 2, 2)?;

        let blocks = self.config.block_layout.len();
        for (b, &layers) in self.config.block_layout.iter().enumerate() {
            let mut parts = vec![features];
            for _ in 0..layers {
                let spec = specs.next().expect("dense layer");
                let cat = if parts.len() == 1 { parts[0] } else { tape.concat_channels(&parts)? };
                let y = self.conv(tape, vars, spec, cat)?;
                if stop == Some(spec.name.as_str()) {
                    return Ok(y);
                }
                parts.push(tape.relu(y)?);
            }
            features = tape.concat_channels(&parts)?;
            if b + 1 < blocks {
                let spec = specs.next().expect("transition");
                let y = self.conv(tape, vars, spec, features)?;
                if stop == Some(spec.name.as_str()) {
                    return Ok(y);
                }
                let y = tape.relu(y)?;
                features = tape.avg_pool2d(y, 2, 2)?;
            }
        }

        let mut h = tape.global_avg_pool(features)?;
        let head = self.config.head_plan();
        let (hidden, out) = head.split_at(head.len() - 1);
        for (name, ..) in hidden {
            let w = self.var(vars, &format!("{name}.weight"));
            let b = self.var(vars, &format!("{name}.bias"));
            let y = tape.dense(h, w, b)?;
            h = tape.relu(y)?;
        }
        h = tape.dropout(h, self.config.head_dropout, training, rng)?;
        let (name, ..) = &out[0];
        let w = self.var(vars, &format!("{name}.weight"));
        let b = self.var(vars, &format!("{name}.bias"));
        Ok(tape.dense(h, w, b)?)
    }

    /// Logits for a batch `[N, 1, H, W]`. Deterministic when `training` is false.
    pub fn forward(&self, batch: &Tensor, training: bool, rng: &mut Stream) -> Result<Tensor> {
        self.check_input(batch.shape())?;
        let mut tape = Tape::new();
        let vars = self.bind(&mut tape, Binding::Fixed)?;
        let x = tape.constant(batch.clone())?;
        let logits = self.forward_tape(&mut tape, &vars, x, training, rng)?;
        Ok(tape.value(logits).clone())
    }

    /// Inference-mode logits.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut unused = rng::substream(0, "unused");
        self.forward(batch, false, &mut unused)
    }

    /// SHA-256 of the serialized checkpoint, hex encoded.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(checkpoint::to_bytes(self, None));
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Plain-text architecture summary.
    pub fn summary(&self) -> String {
        let cfg = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "DenseNet input 1x{0}x{0}", cfg.input_size);
        let _ = writeln!(
            s,
            "stem_filters={} growth_rate={} block_layout={:?} compression={} kernel_size={}",
            cfg.stem_filters, cfg.growth_rate, cfg.block_layout, cfg.compression, cfg.kernel_size
        );
        for conv in cfg.conv_plan() {
            let _ = writeln!(
                s,
                "  conv {:<22} {:>4} -> {:<4} {}x{}",
                conv.name, conv.in_channels, conv.filters, conv.kernel, conv.kernel
            );
        }
        let _ = writeln!(s, "  global_avg_pool -> {}", cfg.feature_channels());
        let head = cfg.head_plan();
        for (i, (name, d_in, d_out)) in head.iter().enumerate() {
            if i + 1 == head.len() {
                let _ = writeln!(s, "  dropout p={}", cfg.head_dropout);
            }
            let _ = writeln!(s, "  dense {name:<22} {d_in:>4} -> {d_out}");
        }
        let _ = writeln!(s, "first_conv_filters={}", self.first_conv().filters);
        let _ = writeln!(s, "last_conv_filters={}", self.last_conv().filters);
        let _ = writeln!(s, "parameters={} frozen={}", self.param_count(), self.frozen.len());
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_checkpoint(self, path)
    }
}
