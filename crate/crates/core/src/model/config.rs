use super::ModelError;

/// Classifier head widths. Changing them requires `head_override`.
pub const HEAD_DIMS: [usize; 3] = [512, 256, 256];
pub const HEAD_DROPOUT: f32 = 0.3;

/// Architecture recipe for the miniature DenseNet.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseNetConfig {
    /// Side of the square grayscale input.
    pub input_size: usize,
    pub stem_filters: usize,
    /// New channels contributed by each dense layer.
    pub growth_rate: usize,
    /// Dense layers per block.
    pub block_layout: Vec<usize>,
    /// Channel ratio kept by each transition.
    pub compression: f32,
    pub kernel_size: usize,
    pub head_dims: Vec<usize>,
    pub head_dropout: f32,
    pub head_override: bool,
}

impl Default for DenseNetConfig {
    fn default() -> Self {
        DenseNetConfig {
            input_size: 64,
            stem_filters: 8,
            growth_rate: 4,
            block_layout: vec![2, 2, 2],
            compression: 0.5,
            kernel_size: 3,
            head_dims: HEAD_DIMS.to_vec(),
            head_dropout: HEAD_DROPOUT,
            head_override: false,
        }
    }
}

/// Shape recipe for one convolution in the backbone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub name: String,
    pub in_channels: usize,
    pub filters: usize,
    pub kernel: usize,
}

impl DenseNetConfig {
    /// Wide stem and growth so the first and last conv layers have 64 and 32 filters.
    pub fn wide() -> Self {
        DenseNetConfig { stem_filters: 64, growth_rate: 32, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::Config(msg));
        if self.stem_filters == 0 {
            return bad("stem_filters must be at least 1".into());
        }
        if self.growth_rate == 0 {
            return bad("growth_rate must be at least 1".into());
        }
        if self.block_layout.is_empty() || self.block_layout.contains(&0) {
            return bad(format!("every block needs at least one layer, got {:?}", self.block_layout));
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return bad(format!("compression {} outside (0, 1]", self.compression));
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad(format!("kernel_size {} must be odd", self.kernel_size));
        }
        let halvings = self.block_layout.len();
        if self.input_size == 0 || !self.input_size.is_multiple_of(1 << halvings) {
            return bad(format!(
                "input_size {} must be a positive multiple of {} for {} pooling stages",
                self.input_size,
                1 << halvings,
                halvings
            ));
        }
        if !self.head_override {
            if self.head_dims != HEAD_DIMS {
                return bad(format!(
                    "head_dims {:?} differ from {:?} without head_override",
                    self.head_dims, HEAD_DIMS
                ));
            }
            if self.head_dropout != HEAD_DROPOUT {
                return bad(format!(
                    "head_dropout {} differs from {HEAD_DROPOUT} without head_override",
                    self.head_dropout
                ));
            }
        } else {
            if self.head_dims.is_empty() || self.head_dims.contains(&0) {
                return bad(format!("head_dims {:?} must be non-empty and positive", self.head_dims));
            }
            if !(0.0..1.0).contains(&self.head_dropout) {
                return bad(format!("head_dropout {} outside [0, 1)", self.head_dropout));
            }
            log::warn!(
                "classifier head overridden: dims {:?}, dropout {} (default {:?}, {HEAD_DROPOUT})",
                self.head_dims,
                self.head_dropout,
                HEAD_DIMS
            );
        }
        Ok(())
    }

    pub fn transition_channels(&self, channels: usize) -> usize {
        ((channels as f32 * self.compression).floor() as usize).max(1)
    }

    /// Every backbone convolution in execution order.
    pub fn conv_plan(&self) -> Vec<ConvSpec> {
        let k = self.kernel_size;
        let mut plan =
            vec![ConvSpec { name: "stem.conv".into(), in_channels: 1, filters: self.stem_filters, kernel: k }];
        let mut channels = self.stem_filters;
        for (b, &layers) in self.block_layout.iter().enumerate() {
            for l in 0..layers {
                plan.push(ConvSpec {
                    name: format!("block{}.layer{}.conv", b + 1, l + 1),
                    in_channels: channels + l * self.growth_rate,
                    filters: self.growth_rate,
                    kernel: k,
                });
            }
            channels += layers * self.growth_rate;
            if b + 1 < self.block_layout.len() {
                let out = self.transition_channels(channels);
                plan.push(ConvSpec {
                    name: format!("transition{}.conv", b + 1),
                    in_channels: channels,
                    filters: out,
                    kernel: 1,
                });
                channels = out;
            }
        }
        plan
    }

    /// Channels entering the classifier after global pooling.
    pub fn feature_channels(&self) -> usize {
        let mut channels = self.stem_filters;
        for (b, &layers) in self.block_layout.iter().enumerate() {
            channels += layers * self.growth_rate;
            if b + 1 < self.block_layout.len() {
                channels = self.transition_channels(channels);
            }
        }
        channels
    }

    /// (name, input width, output width) for each head dense layer.
    pub fn head_plan(&self) -> Vec<(String, usize, usize)> {
        let mut plan = Vec::new();
        let mut width = self.feature_channels();
        for (i, &d) in self.head_dims.iter().enumerate() {
            plan.push((format!("head.dense{}", i + 1), width, d));
            width = d;
        }
        plan.push(("head.out".into(), width, 1));
        plan
    }

    /// key=value lines, stable order; shared by checkpoints and run configs.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        vec![
            ("input_size", self.input_size.to_string()),
            ("stem_filters", self.stem_filters.to_string()),
            ("growth_rate", self.growth_rate.to_string()),
            ("block_layout", join(&self.block_layout)),
            ("compression", self.compression.to_string()),
            ("kernel_size", self.kernel_size.to_string()),
            ("head_dims", join(&self.head_dims)),
            ("head_dropout", self.head_dropout.to_string()),
            ("head_override", self.head_override.to_string()),
        ]
    }

    /// Applies one key=value pair; returns false for unknown keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
            v.trim().parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        fn list(v: &str) -> Result<Vec<usize>, String> {
            v.split(',').map(num).collect()
        }
        match key {
            "input_size" => self.input_size = num(value)?,
            "stem_filters" => self.stem_filters = num(value)?,
            "growth_rate" => self.growth_rate = num(value)?,
            "block_layout" => self.block_layout = list(value)?,
            "compression" => self.compression = num(value)?,
            "kernel_size" => self.kernel_size = num(value)?,
            "head_dims" => self.head_dims = list(value)?,
            "head_dropout" => self.head_dropout = num(value)?,
            "head_override" => self.head_override = num(value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}
