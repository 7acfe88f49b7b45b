use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::AppError;
use crate::data::{AugmentParams, Range, SynthParams};
use crate::interp::AscentConfig;
use crate::model::DenseNetConfig;
use crate::train::{PretextConfig, Regime, DEFAULT_LR};

/// Which regimes `crossval` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegimeChoice {
    Pretrained,
    Retrained,
    Both,
}

impl RegimeChoice {
    pub fn regimes(self) -> Vec<Regime> {
        match self {
            RegimeChoice::Pretrained => vec![Regime::Pretrained],
            RegimeChoice::Retrained => vec![Regime::Retrained],
            RegimeChoice::Both => vec![Regime::Pretrained, Regime::Retrained],
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            RegimeChoice::Pretrained => "pretrained",
            RegimeChoice::Retrained => "retrained",
            RegimeChoice::Both => "both",
        }
    }
}

impl FromStr for RegimeChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "both" => Ok(RegimeChoice::Both),
            _ => match Regime::parse(s) {
                Some(Regime::Pretrained) => Ok(RegimeChoice::Pretrained),
                Some(Regime::Retrained) => Ok(RegimeChoice::Retrained),
                None => Err(format!("expected pretrained, retrained or both, got {s:?}")),
            },
        }
    }
}

/// Everything a run needs, read from a flat `section.key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub out: PathBuf,
    /// Pretext backbone to load; trained into the output directory when absent.
    pub backbone: Option<PathBuf>,
    /// Existing dataset manifest; synthesized when absent.
    pub data: Option<PathBuf>,
    pub synth: SynthParams,
    pub augment: AugmentParams,
    pub model: DenseNetConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub regime: RegimeChoice,
    pub pretext: PretextConfig,
    pub k: usize,
    pub stratified: bool,
    pub threshold: f64,
    /// Epochs at which saliency probes are rendered.
    pub probe_epochs: Vec<usize>,
    pub ascent: AscentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            jobs: 1,
            out: PathBuf::from("out"),
            backbone: None,
            data: None,
            synth: SynthParams::default(),
            augment: AugmentParams::default(),
            model: DenseNetConfig::default(),
            epochs: 10,
            batch_size: 2,
            lr: DEFAULT_LR,
            regime: RegimeChoice::Both,
            pretext: PretextConfig::default(),
            k: 5,
            stratified: true,
            threshold: 0.5,
            probe_epochs: vec![1, 5, 10],
            ascent: AscentConfig::default(),
        }
    }
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("cannot parse {v:?}"))
}

fn list(v: &str) -> Result<Vec<usize>, String> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(x.trim())).collect()
}

fn range(v: &str) -> Result<Range, String> {
    match v.split_once(',') {
        Some((lo, hi)) => Ok(Range::new(num(lo.trim())?, num(hi.trim())?)),
        None => Err(format!("expected lo,hi but got {v:?}")),
    }
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map_or(String::new(), |p| p.display().to_string())
}

fn show_range(r: Range) -> String {
    format!("{},{}", r.lo, r.hi)
}

fn show_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Applies one pair. `Ok(false)` means the key is unknown.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let s = &mut self.synth;
        let a = &mut self.augment;
        let p = &mut self.pretext;
        let g = &mut self.ascent;
        match key {
            "seed" => self.seed = num(value)?,
            "jobs" => self.jobs = num(value)?,
            "paths.out" => self.out = PathBuf::from(value),
            "paths.backbone" => self.backbone = opt_path(value),
            "paths.data" => self.data = opt_path(value),
            "synth.image_size" => s.image_size = num(value)?,
            "synth.stem_length" => s.stem_length = range(value)?,
            "synth.stem_width" => s.stem_width = range(value)?,
            "synth.stem_taper" => s.stem_taper = range(value)?,
            "synth.stem_angle_deg" => s.stem_angle_deg = range(value)?,
            "synth.cup_radius" => s.cup_radius = range(value)?,
            "synth.noise_scale" => s.noise_scale = num(value)?,
            "synth.lucency_width" => s.lucency_width = range(value)?,
            "synth.lucency_contrast" => s.lucency_contrast = num(value)?,
            "synth.loose_count" => s.loose_count = num(value)?,
            "synth.well_fixed_count" => s.well_fixed_count = num(value)?,
            "augment.rotation_deg" => a.rotation_deg = num(value)?,
            "augment.scale_min" => a.scale_min = num(value)?,
            "augment.scale_max" => a.scale_max = num(value)?,
            "augment.translate_frac" => a.translate_frac = num(value)?,
            "augment.intensity_jitter" => a.intensity_jitter = num(value)?,
            "train.epochs" => self.epochs = num(value)?,
            "train.batch_size" => self.batch_size = num(value)?,
            "train.lr" => self.lr = num(value)?,
            "train.regime" => self.regime = value.parse()?,
            "pretext.count" => p.count = num(value)?,
            "pretext.holdout" => p.holdout = num(value)?,
            "pretext.epochs" => p.epochs = num(value)?,
            "pretext.batch_size" => p.batch_size = num(value)?,
            "pretext.lr" => p.lr = num(value)?,
            "pretext.noise_scale" => p.noise_scale = num(value)?,
            "pretext.seed" => p.seed = num(value)?,
            "crossval.k" => self.k = num(value)?,
            "crossval.stratified" => self.stratified = num(value)?,
            "crossval.threshold" => self.threshold = num(value)?,
            "saliency.probe_epochs" => self.probe_epochs = list(value)?,
            "filters.steps" => g.steps = num(value)?,
            "filters.step_size" => g.step_size = num(value)?,
            "filters.weight_decay" => g.weight_decay = num(value)?,
            "filters.init_low" => g.init_low = num(value)?,
            "filters.init_high" => g.init_high = num(value)?,
            _ => match key.strip_prefix("model.") {
                Some(k) => return self.model.set(k, value),
                None => return Ok(false),
            },
        }
        Ok(true)
    }

    /// Parses `key = value` lines; `#` starts a comment. Unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig, AppError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_no = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {line_no}: expected key=value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(AppError::Config(format!("line {line_no}: key {key} given twice")));
            }
            match cfg.set(key, value) {
                Ok(true) => {}
                Ok(false) => return Err(AppError::UnknownKey { key: key.to_string(), line: line_no }),
                Err(msg) => return Err(AppError::Config(format!("line {line_no}: {key}: {msg}"))),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, AppError> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::missing(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        let bad = |m: String| Err(AppError::Config(m));
        self.synth.validate().map_err(|e| AppError::Config(e.to_string()))?;
        self.augment.validate().map_err(|e| AppError::Config(e.to_string()))?;
        self.model.validate().map_err(|e| AppError::Config(e.to_string()))?;
        self.ascent.validate().map_err(|e| AppError::Config(e.to_string()))?;
        if self.synth.image_size != self.model.input_size {
            return bad(format!(
                "synth.image_size {} differs from model.input_size {}",
                self.synth.image_size, self.model.input_size
            ));
        }
        if self.jobs == 0 || self.batch_size == 0 || self.k < 2 {
            return bad("jobs and train.batch_size must be at least 1, crossval.k at least 2".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("train.lr {} must be positive", self.lr));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!("crossval.threshold {} outside [0, 1]", self.threshold));
        }
        if let Some(e) = self.probe_epochs.iter().find(|&&e| e == 0 || e > self.epochs) {
            return bad(format!("saliency.probe_epochs entry {e} outside 1..={}", self.epochs));
        }
        Ok(())
    }

    /// Every key with its effective value, in a stable order.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let s = &self.synth;
        let a = &self.augment;
        let p = &self.pretext;
        let g = &self.ascent;
        let mut v: Vec<(String, String)> = [
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
            ("paths.out", self.out.display().to_string()),
            ("paths.backbone", show_path(&self.backbone)),
            ("paths.data", show_path(&self.data)),
            ("synth.image_size", s.image_size.to_string()),
            ("synth.stem_length", show_range(s.stem_length)),
            ("synth.stem_width", show_range(s.stem_width)),
            ("synth.stem_taper", show_range(s.stem_taper)),
            ("synth.stem_angle_deg", show_range(s.stem_angle_deg)),
            ("synth.cup_radius", show_range(s.cup_radius)),
            ("synth.noise_scale", s.noise_scale.to_string()),
            ("synth.lucency_width", show_range(s.lucency_width)),
            ("synth.lucency_contrast", s.lucency_contrast.to_string()),
            ("synth.loose_count", s.loose_count.to_string()),
            ("synth.well_fixed_count", s.well_fixed_count.to_string()),
            ("augment.rotation_deg", a.rotation_deg.to_string()),
            ("augment.scale_min", a.scale_min.to_string()),
            ("augment.scale_max", a.scale_max.to_string()),
            ("augment.translate_frac", a.translate_frac.to_string()),
            ("augment.intensity_jitter", a.intensity_jitter.to_string()),
            ("train.epochs", self.epochs.to_string()),
            ("train.batch_size", self.batch_size.to_string()),
            ("train.lr", self.lr.to_string()),
            ("train.regime", self.regime.as_str().to_string()),
            ("pretext.count", p.count.to_string()),
            ("pretext.holdout", p.holdout.to_string()),
            ("pretext.epochs", p.epochs.to_string()),
            ("pretext.batch_size", p.batch_size.to_string()),
            ("pretext.lr", p.lr.to_string()),
            ("pretext.noise_scale", p.noise_scale.to_string()),
            ("pretext.seed", p.seed.to_string()),
            ("crossval.k", self.k.to_string()),
            ("crossval.stratified", self.stratified.to_string()),
            ("crossval.threshold", self.threshold.to_string()),
            ("saliency.probe_epochs", show_list(&self.probe_epochs)),
            ("filters.steps", g.steps.to_string()),
            ("filters.step_size", g.step_size.to_string()),
            ("filters.weight_decay", g.weight_decay.to_string()),
            ("filters.init_low", g.init_low.to_string()),
            ("filters.init_high", g.init_high.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        v.extend(self.model.to_pairs().into_iter().map(|(k, val)| (format!("model.{k}"), val)));
        v
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# resolved configuration\n");
        for (k, v) in self.to_pairs() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
