use num_traits::Float;
use rand::Rng;

use super::kernels::{self, ConvGeom, PoolGeom};
use super::{dims2, dims4, Result, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Var, geom: ConvGeom },
    Dense { input: Var, weights: Var, bias: Var, n: usize, d: usize, m: usize },
    Relu(Var),
    Sigmoid(Var),
    AvgPool { input: Var, geom: PoolGeom },
    GlobalAvgPool { input: Var, planes: usize, hw: usize },
    Concat { inputs: Vec<Var>, channels: Vec<usize>, n: usize, hw: usize },
    Dropout { input: Var, mask: Vec<f32> },
    Bce { prob: Var, label: Var },
    Mul(Var, Var),
    Sum(Var),
    ChannelMean { input: Var, channel: usize, n: usize, c: usize, hw: usize },
    Reshape(Var),
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv2d { .. } => "conv2d",
            Op::Dense { .. } => "dense",
            Op::Relu(_) => "relu",
            Op::Sigmoid(_) => "sigmoid",
            Op::AvgPool { .. } => "avg_pool2d",
            Op::GlobalAvgPool { .. } => "global_avg_pool",
            Op::Concat { .. } => "concat_channels",
            Op::Dropout { .. } => "dropout",
            Op::Bce { .. } => "bce_loss",
            Op::Mul(..) => "mul",
            Op::Sum(_) => "sum",
            Op::ChannelMean { .. } => "channel_mean",
            Op::Reshape(_) => "reshape",
        }
    }

    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernel, bias, .. } => vec![*input, *kernel, *bias],
            Op::Dense { input, weights, bias, .. } => vec![*input, *weights, *bias],
            Op::Relu(x) | Op::Sigmoid(x) | Op::Sum(x) | Op::Reshape(x) => vec![*x],
            Op::AvgPool { input, .. }
            | Op::GlobalAvgPool { input, .. }
            | Op::Dropout { input, .. }
            | Op::ChannelMean { input, .. } => vec![*input],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Bce { prob, label } => vec![*prob, *label],
            Op::Mul(a, b) => vec![*a, *b],
        }
    }

    /// Forward rule, generic so the same code serves `f32` training and `f64` replay.
    pub(crate) fn eval<'a, F: Float + 'a>(&self, val: impl Fn(Var) -> &'a [F]) -> Vec<F> {
        match self {
            Op::Leaf => unreachable!("leaves carry their own value"),
            Op::Conv2d { input, kernel, bias, geom } => {
                kernels::conv2d_forward(geom, val(*input), val(*kernel), val(*bias))
            }
            Op::Dense { input, weights, bias, n, d, m } => {
                kernels::dense_forward(*n, *d, *m, val(*input), val(*weights), val(*bias))
            }
            Op::Relu(x) => val(*x).iter().map(|&v| if v > F::zero() { v } else { F::zero() }).collect(),
            Op::Sigmoid(x) => val(*x).iter().map(|&v| kernels::sigmoid(v)).collect(),
            Op::AvgPool { input, geom } => kernels::avg_pool_forward(geom, val(*input)),
            Op::GlobalAvgPool { input, planes, hw } => kernels::plane_mean(*planes, *hw, val(*input)),
            Op::Concat { inputs, channels, n, hw } => {
                let parts: Vec<&[F]> = inputs.iter().map(|&v| val(v)).collect();
                kernels::concat_forward(*n, *hw, channels, &parts)
            }
            Op::Dropout { input, mask } => {
                val(*input).iter().zip(mask).map(|(&v, &m)| v * F::from(m).unwrap()).collect()
            }
            Op::Bce { prob, label } => vec![kernels::bce_forward(val(*prob), val(*label))],
            Op::Mul(a, b) => val(*a).iter().zip(val(*b)).map(|(&x, &y)| x * y).collect(),
            Op::Sum(x) => vec![val(*x).iter().fold(F::zero(), |a, &v| a + v)],
            Op::ChannelMean { input, channel, n, c, hw } => {
                let x = val(*input);
                let mut acc = F::zero();
                for b in 0..*n {
                    for &v in &x[(b * c + channel) * hw..][..*hw] {
                        acc = acc + v;
                    }
                }
                vec![acc / F::from(n * hw).unwrap()]
            }
            Op::Reshape(x) => val(*x).to_vec(),
        }
    }
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Linear record of executed operations.
///
/// Nodes are appended in execution order, so every node's inputs precede
/// it and a single reverse sweep visits each node once.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Tensor>>,
    backward_done: bool,
    fault: Option<&'static str>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that receives a gradient.
    pub fn param(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.leaf(value, false)
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Result<Var> {
        value.ensure_finite("leaf", "input")?;
        Ok(self.push_node(value, Op::Leaf, requires_grad))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` root with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn reset_grads(&mut self) {
        self.grads.clear();
        self.backward_done = false;
    }

    /// Makes the backward rule of every `op_name` node return half its true
    /// gradient. Exists only so gradient checks can be shown to catch bugs.
    #[doc(hidden)]
    pub fn inject_backward_fault(&mut self, op_name: &'static str) {
        self.fault = Some(op_name);
    }

    fn push_node(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, op: Op, shape: Vec<usize>) -> Result<Var> {
        let name = op.name();
        let data = op.eval(|v| self.nodes[v.0].value.data());
        let value = Tensor::new(&shape, data)?;
        value.ensure_finite(name, "output")?;
        let requires_grad = op.inputs().iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_node(value, op, requires_grad))
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let ishape = dims4("conv2d", self.shape(input))?;
        let kshape = dims4("conv2d", self.shape(kernel))?;
        if self.shape(bias) != [kshape[0]] {
            return Err(TensorError::Shape {
                op: "conv2d",
                detail: format!("bias shape {:?} for {} filters", self.shape(bias), kshape[0]),
            });
        }
        let geom = ConvGeom::new(ishape, kshape, stride, padding)?;
        let shape = vec![geom.n, geom.f, geom.oh, geom.ow];
        self.record(Op::Conv2d { input, kernel, bias, geom }, shape)
    }

    pub fn dense(&mut self, input: Var, weights: Var, bias: Var) -> Result<Var> {
        let [n, d] = dims2("dense", self.shape(input))?;
        let [wd, m] = dims2("dense", self.shape(weights))?;
        if wd != d || self.shape(bias) != [m] {
            return Err(TensorError::Shape {
                op: "dense",
                detail: format!(
                    "input {:?}, weights {:?}, bias {:?}",
                    self.shape(input),
                    self.shape(weights),
                    self.shape(bias)
                ),
            });
        }
        self.record(Op::Dense { input, weights, bias, n, d, m }, vec![n, m])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        self.record(Op::Relu(x), shape)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        self.record(Op::Sigmoid(x), shape)
    }

    pub fn avg_pool2d(&mut self, x: Var, window: usize, stride: usize) -> Result<Var> {
        let geom = PoolGeom::new(dims4("avg_pool2d", self.shape(x))?, window, stride)?;
        let shape = vec![geom.n, geom.c, geom.oh, geom.ow];
        self.record(Op::AvgPool { input: x, geom }, shape)
    }

    /// `[N, C, H, W] -> [N, C]`
    pub fn global_avg_pool(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = dims4("global_avg_pool", self.shape(x))?;
        self.record(Op::GlobalAvgPool { input: x, planes: n * c, hw: h * w }, vec![n, c])
    }

    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let first =
            parts.first().ok_or_else(|| TensorError::Shape { op: "concat_channels", detail: "no inputs".into() })?;
        let [n, _, h, w] = dims4("concat_channels", self.shape(*first))?;
        let mut channels = Vec::with_capacity(parts.len());
        for &p in parts {
            let [pn, pc, ph, pw] = dims4("concat_channels", self.shape(p))?;
            if (pn, ph, pw) != (n, h, w) {
                return Err(TensorError::Shape {
                    op: "concat_channels",
                    detail: format!("{:?} does not match N,H,W of {:?}", self.shape(p), self.shape(*first)),
                });
            }
            channels.push(pc);
        }
        let total = channels.iter().sum();
        self.record(Op::Concat { inputs: parts.to_vec(), channels, n, hw: h * w }, vec![n, total, h, w])
    }

    /// Inverted dropout. Outside training this returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f32, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(TensorError::DropoutRate(p));
        }
        if !training {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let mask = (0..self.value(x).len()).map(|_| if rng.gen::<f32>() < p { 0.0 } else { keep }).collect();
        let shape = self.shape(x).to_vec();
        self.record(Op::Dropout { input: x, mask }, shape)
    }

    /// Mean binary cross-entropy; probabilities are clamped to `[1e-7, 1 - 1e-7]`.
    pub fn bce_loss(&mut self, prob: Var, label: Var) -> Result<Var> {
        if self.shape(prob) != self.shape(label) {
            return Err(TensorError::Shape {
                op: "bce_loss",
                detail: format!("prob {:?} vs label {:?}", self.shape(prob), self.shape(label)),
            });
        }
        if let Some(&bad) = self.value(label).data().iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(TensorError::Label(bad));
        }
        self.record(Op::Bce { prob, label }, vec![1])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::Shape {
                op: "mul",
                detail: format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            });
        }
        let shape = self.shape(a).to_vec();
        self.record(Op::Mul(a, b), shape)
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        self.record(Op::Sum(x), vec![1])
    }

    /// Mean of one channel over batch and space: `[N, C, H, W] -> scalar`.
    pub fn channel_mean(&mut self, x: Var, channel: usize) -> Result<Var> {
        let [n, c, h, w] = dims4("channel_mean", self.shape(x))?;
        if channel >= c {
            return Err(TensorError::Shape { op: "channel_mean", detail: format!("channel {channel} of {c}") });
        }
        self.record(Op::ChannelMean { input: x, channel, n, c, hw: h * w }, vec![1])
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(x).len() || shape.contains(&0) {
            return Err(TensorError::Shape { op: "reshape", detail: format!("{:?} -> {shape:?}", self.shape(x)) });
        }
        self.record(Op::Reshape(x), shape.to_vec())
    }

    /// Populates gradients of `root` for every node that requires one.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.backward_done {
            return Err(TensorError::BackwardTwice);
        }
        let rnode = &self.nodes[root.0];
        if !rnode.value.is_scalar() {
            return Err(TensorError::NonScalarRoot(rnode.value.shape().to_vec()));
        }
        if !rnode.requires_grad {
            return Err(TensorError::Detached);
        }
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        for idx in (0..=root.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let contributions = self.backward_node(node, &dy)?;
            grads[idx] = Some(dy);
            for (input, mut g) in contributions {
                if self.fault == Some(node.op.name()) {
                    g.iter_mut().for_each(|v| *v *= 0.5);
                }
                if g.iter().any(|v| !v.is_finite()) {
                    return Err(TensorError::NonFinite { op: node.op.name(), tensor: "gradient" });
                }
                match &mut grads[input.0] {
                    Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(g),
                }
            }
        }
        self.grads = grads
            .into_iter()
            .enumerate()
            .map(|(i, g)| g.map(|g| Tensor { shape: self.nodes[i].value.shape().to_vec(), data: g }))
            .collect();
        self.backward_done = true;
        Ok(())
    }

    fn backward_node(&self, node: &Node, dy: &[f32]) -> Result<Vec<(Var, Vec<f32>)>> {
        let needs = |v: Var| self.nodes[v.0].requires_grad;
        let val = |v: Var| self.nodes[v.0].value.data();
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom } => {
                if needs(*input) {
                    out.push((*input, kernels::conv2d_grad_input(geom, val(*kernel), dy)));
                }
                if needs(*kernel) {
                    out.push((*kernel, kernels::conv2d_grad_kernel(geom, val(*input), dy)));
                }
                if needs(*bias) {
                    out.push((*bias, kernels::conv2d_grad_bias(geom, dy)));
                }
            }
            Op::Dense { input, weights, bias, n, d, m } => {
                if needs(*input) {
                    out.push((*input, kernels::dense_grad_input(*n, *d, *m, val(*weights), dy)));
                }
                if needs(*weights) {
                    out.push((*weights, kernels::dense_grad_weights(*n, *d, *m, val(*input), dy)));
                }
                if needs(*bias) {
                    let mut db = vec![0.0f32; *m];
                    for row in dy.chunks_exact(*m) {
                        db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
                    }
                    out.push((*bias, db));
                }
            }
            Op::Relu(x) => {
                if needs(*x) {
                    let g = val(*x).iter().zip(dy).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect();
                    out.push((*x, g));
                }
            }
            Op::Sigmoid(x) => {
                if needs(*x) {
                    let g = node.value.data().iter().zip(dy).map(|(&s, &d)| d * s * (1.0 - s)).collect();
                    out.push((*x, g));
                }
            }
            Op::AvgPool { input, geom } => {
                if needs(*input) {
                    out.push((*input, kernels::avg_pool_grad(geom, dy)));
                }
            }
            Op::GlobalAvgPool { input, hw, .. } => {
                if needs(*input) {
                    let scale = 1.0 / *hw as f32;
                    let g = dy.iter().flat_map(|&d| std::iter::repeat_n(d * scale, *hw)).collect();
                    out.push((*input, g));
                }
            }
            Op::Concat { inputs, channels, n, hw } => {
                let total: usize = channels.iter().sum();
                let mut offset = 0;
                for (&part, &c) in inputs.iter().zip(channels) {
                    if needs(part) {
                        let mut g = Vec::with_capacity(n * c * hw);
                        for b in 0..*n {
                            g.extend_from_slice(&dy[(b * total + offset) * hw..][..c * hw]);
                        }
                        out.push((part, g));
                    }
                    offset += c;
                }
            }
            Op::Dropout { input, mask } => {
                if needs(*input) {
                    out.push((*input, dy.iter().zip(mask).map(|(d, m)| d * m).collect()));
                }
            }
            Op::Bce { prob, label } => {
                if needs(*prob) {
                    let n = val(*prob).len() as f64;
                    let g = val(*prob)
                        .iter()
                        .zip(val(*label))
                        .map(|(&p, &y)| {
                            let p = p as f64;
                            let y = y as f64;
                            if !(kernels::PROB_CLAMP..=1.0 - kernels::PROB_CLAMP).contains(&p) {
                                0.0
                            } else {
                                (dy[0] as f64 * (-y / p + (1.0 - y) / (1.0 - p)) / n) as f32
                            }
                        })
                        .collect();
                    out.push((*prob, g));
                }
            }
            Op::Mul(a, b) => {
                if needs(*a) {
                    out.push((*a, dy.iter().zip(val(*b)).map(|(d, v)| d * v).collect()));
                }
                if needs(*b) {
                    out.push((*b, dy.iter().zip(val(*a)).map(|(d, v)| d * v).collect()));
                }
            }
            Op::Sum(x) => {
                if needs(*x) {
                    out.push((*x, vec![dy[0]; val(*x).len()]));
                }
            }
            Op::ChannelMean { input, channel, n, c, hw } => {
                if needs(*input) {
                    let mut g = vec![0.0f32; n * c * hw];
                    let v = dy[0] / (n * hw) as f32;
                    for b in 0..*n {
                        g[(b * c + channel) * hw..][..*hw].fill(v);
                    }
                    out.push((*input, g));
                }
            }
            Op::Reshape(x) => {
                if needs(*x) {
                    out.push((*x, dy.to_vec()));
                }
            }
        }
        Ok(out)
    }

    /// Re-evaluates the recorded graph in `f64` up to `root`, substituting
    /// the given leaf values.
    pub(crate) fn replay_f64(&self, root: Var, overrides: &[(Var, &[f64])]) -> f64 {
        let mut values: Vec<Vec<f64>> = Vec::with_capacity(root.0 + 1);
        for (i, node) in self.nodes[..=root.0].iter().enumerate() {
            let v = match node.op {
                Op::Leaf => match overrides.iter().find(|(v, _)| v.0 == i) {
                    Some((_, data)) => data.to_vec(),
                    None => node.value.data().iter().map(|&x| x as f64).collect(),
                },
                ref op => op.eval(|v: Var| values[v.0].as_slice()),
            };
            values.push(v);
        }
        values[root.0][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f32]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn scalar_kernel_scales_input() {
        let mut tape = Tape::new();
        let data: Vec<f32> = (1..=9).map(|v| v as f32).collect();
        let x = tape.constant(t(&[1, 1, 3, 3], &data)).unwrap();
        let k = tape.constant(t(&[1, 1, 1, 1], &[2.0])).unwrap();
        let b = tape.constant(t(&[1], &[0.0])).unwrap();
        let y = tape.conv2d(x, k, b, 1, 0).unwrap();
        let expect: Vec<f32> = data.iter().map(|v| v * 2.0).collect();
        assert_eq!(tape.value(y).data(), expect.as_slice());
    }

    #[test]
    fn two_by_two_ones_kernel_sums() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let k = tape.constant(Tensor::full(&[1, 1, 2, 2], 1.0)).unwrap();
        let b = tape.constant(t(&[1], &[0.0])).unwrap();
        let y = tape.conv2d(x, k, b, 1, 0).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 1, 1]);
        assert_eq!(tape.value(y).item(), 10.0);
    }

    #[test]
    fn conv_shape_errors() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[1, 2, 3, 3])).unwrap();
        let k = tape.constant(Tensor::zeros(&[1, 3, 3, 3])).unwrap();
        let b = tape.constant(Tensor::zeros(&[1])).unwrap();
        assert!(matches!(tape.conv2d(x, k, b, 1, 0), Err(TensorError::Shape { .. })));
        let k = tape.constant(Tensor::zeros(&[1, 2, 5, 5])).unwrap();
        assert!(matches!(tape.conv2d(x, k, b, 1, 0), Err(TensorError::EmptyOutput { .. })));
    }

    #[test]
    fn dense_affine() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[1, 2], &[1.0, 2.0])).unwrap();
        let w = tape.constant(t(&[2, 2], &[3.0, 0.0, 0.0, 3.0])).unwrap();
        let b = tape.param(t(&[2], &[1.0, 1.0])).unwrap();
        let y = tape.dense(x, w, b).unwrap();
        assert_eq!(tape.value(y).data(), &[4.0, 7.0]);
        let s = tape.sum(y).unwrap();
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(b).unwrap().data(), &[1.0, 1.0]);
    }

    #[test]
    fn dense_identity_and_mismatch() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2, 3], &[1.0, -2.0, 3.0, 0.5, 0.0, -1.0])).unwrap();
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 3 + i] = 1.0;
        }
        let w = tape.constant(eye).unwrap();
        let b = tape.constant(Tensor::zeros(&[3])).unwrap();
        let y = tape.dense(x, w, b).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let bad = tape.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(tape.dense(x, bad, b).is_err());
    }

    #[test]
    fn relu_sigmoid_definitions() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[-1.0, 0.0, 2.0])).unwrap();
        let r = tape.relu(x).unwrap();
        assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = tape.constant(t(&[1], &[0.0])).unwrap();
        let s = tape.sigmoid(z).unwrap();
        assert_eq!(tape.value(s).item(), 0.5);
    }

    #[test]
    fn dropout_inference_is_identity() {
        let mut tape = Tape::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = tape.constant(t(&[4], &[1.0, 2.0, 3.0, 4.0])).unwrap();
        let y = tape.dropout(x, 0.3, false, &mut rng).unwrap();
        assert_eq!(tape.value(y).data(), tape.value(x).data());
        assert!(matches!(tape.dropout(x, 1.0, true, &mut rng), Err(TensorError::DropoutRate(_))));
        assert!(tape.dropout(x, -0.1, true, &mut rng).is_err());
    }

    #[test]
    fn bce_values_and_label_guard() {
        let mut tape = Tape::new();
        let p = tape.constant(t(&[1, 1], &[0.5])).unwrap();
        let y = tape.constant(t(&[1, 1], &[1.0])).unwrap();
        let l = tape.bce_loss(p, y).unwrap();
        assert!((tape.value(l).item() - std::f32::consts::LN_2).abs() < 1e-6);

        let p = tape.constant(t(&[3, 1], &[0.0, 1.0, 1.0])).unwrap();
        let y = tape.constant(t(&[3, 1], &[0.0, 1.0, 1.0])).unwrap();
        let l = tape.bce_loss(p, y).unwrap();
        assert!(tape.value(l).item() <= 1e-6);

        let bad = tape.constant(t(&[3, 1], &[0.0, 0.5, 1.0])).unwrap();
        assert_eq!(tape.bce_loss(p, bad), Err(TensorError::Label(0.5)));
    }

    #[test]
    fn square_sum_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[3], &[1.0, -2.0, 0.5])).unwrap();
        let sq = tape.mul(x, x).unwrap();
        let f = tape.sum(sq).unwrap();
        tape.backward(f).unwrap();
        assert_eq!(tape.grad(x).unwrap().data(), &[2.0, -4.0, 1.0]);
        assert_eq!(tape.backward(f), Err(TensorError::BackwardTwice));
        tape.reset_grads();
        tape.backward(f).unwrap();
    }

    #[test]
    fn unused_leaf_gets_no_gradient_flow() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2], &[1.0, 2.0])).unwrap();
        let unused = tape.param(t(&[2], &[5.0, 6.0])).unwrap();
        let f = tape.sum(x).unwrap();
        tape.backward(f).unwrap();
        let g = tape.grad(unused).map(|g| g.data().to_vec()).unwrap_or(vec![0.0; 2]);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn backward_guards() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[2], &[1.0, 2.0])).unwrap();
        assert_eq!(tape.backward(x), Err(TensorError::NonScalarRoot(vec![2])));
        let c = tape.constant(t(&[2], &[1.0, 2.0])).unwrap();
        let s = tape.sum(c).unwrap();
        assert_eq!(tape.backward(s), Err(TensorError::Detached));
    }

    #[test]
    fn non_finite_is_reported() {
        let mut tape = Tape::new();
        assert!(matches!(tape.constant(t(&[1], &[f32::NAN])), Err(TensorError::NonFinite { op: "leaf", .. })));
        let big = tape.constant(t(&[2], &[3e38, 3e38])).unwrap();
        assert!(matches!(tape.sum(big), Err(TensorError::NonFinite { op: "sum", .. })));
    }

    #[test]
    fn concat_then_slice_recovers_inputs() {
        let mut tape = Tape::new();
        let a = t(&[2, 1, 2, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let b = Tensor::new(&[2, 2, 2, 2], (0..16).map(|v| v as f32 * 0.5).collect()).unwrap();
        let va = tape.constant(a.clone()).unwrap();
        let vb = tape.constant(b.clone()).unwrap();
        let c = tape.concat_channels(&[va, vb]).unwrap();
        assert_eq!(tape.shape(c), &[2, 3, 2, 2]);
        assert_eq!(tape.value(c).slice_channels(0, 1).unwrap(), a);
        assert_eq!(tape.value(c).slice_channels(1, 2).unwrap(), b);
        let odd = tape.constant(Tensor::zeros(&[2, 1, 3, 2])).unwrap();
        assert!(tape.concat_channels(&[va, odd]).is_err());
    }

    #[test]
    fn avg_pool_averages_windows() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::new(&[1, 1, 2, 4], (0..8).map(|v| v as f32).collect()).unwrap()).unwrap();
        let y = tape.avg_pool2d(x, 2, 2).unwrap();
        assert_eq!(tape.value(y).data(), &[2.5, 4.5]);
        assert!(tape.avg_pool2d(x, 3, 1).is_err());
    }
}
