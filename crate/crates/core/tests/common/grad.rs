//! Seeded finite-difference cases, one per differentiable tape operation.
//! Each case returns the max relative error of the check; `fault` corrupts
//! the named backward rule.

use lucenet::model::{DenseNetConfig, Init, Model, ModelError};
use lucenet::tensor::{grad_check_with, GradCheckOptions, Tape, Tensor, TensorError, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u64 = 100;
pub const TOL: f64 = 1e-3;

pub type Case = fn(u64, Option<&'static str>) -> f64;

/// (tape op exercised, case). The fault control corrupts that op.
pub const OP_CASES: &[(&str, Case)] = &[
    ("conv2d", conv2d),
    ("dense", dense),
    ("relu", relu),
    ("sigmoid", sigmoid),
    ("avg_pool2d", avg_pool),
    ("global_avg_pool", global_pool),
    ("channel_mean", channel_mean),
    ("concat_channels", concat),
    ("dropout", dropout),
    ("bce_loss", bce),
    ("mul", mul_reshape),
];

pub fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
}

/// Values bounded away from zero so ReLU kinks sit outside the difference stencil.
fn rand_away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let mag = rng.gen_range(0.05f32..1.0);
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// Contracts an output with a fixed random weighting so every output element matters.
pub fn project(tape: &mut Tape, y: Var, seed: u64) -> Result<Var, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let shape = tape.shape(y).to_vec();
    let r = tape.constant(rand_tensor(&mut rng, &shape))?;
    let prod = tape.mul(y, r)?;
    tape.sum(prod)
}

fn check<B>(leaves: &[Tensor], eps: f64, fault: Option<&'static str>, build: B) -> f64
where
    B: FnOnce(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let opts = GradCheckOptions { eps, fault, ..Default::default() };
    grad_check_with(leaves, &opts, build).unwrap().max_rel_error
}

/// Worst error over `CASES` seeds.
pub fn worst(case: impl Fn(u64) -> f64) -> f64 {
    (0..CASES).map(case).fold(0.0, f64::max)
}

pub fn conv2d(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, c, f) = (rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..5));
    let hw = rng.gen_range(3..9);
    let k = [1, 3][rng.gen_range(0..2)];
    let stride = rng.gen_range(1..3);
    let pad = rng.gen_range(0..2);
    let leaves =
        [rand_tensor(&mut rng, &[n, c, hw, hw]), rand_tensor(&mut rng, &[f, c, k, k]), rand_tensor(&mut rng, &[f])];
    check(&leaves, 1e-3, fault, |t, v| {
        let y = t.conv2d(v[0], v[1], v[2], stride, pad)?;
        project(t, y, seed)
    })
}

pub fn dense(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d, m) = (rng.gen_range(1..4), rng.gen_range(1..12), rng.gen_range(1..12));
    let leaves = [rand_tensor(&mut rng, &[n, d]), rand_tensor(&mut rng, &[d, m]), rand_tensor(&mut rng, &[m])];
    check(&leaves, 1e-3, fault, |t, v| {
        let y = t.dense(v[0], v[1], v[2])?;
        project(t, y, seed)
    })
}

pub fn relu(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..40);
    check(&[rand_away_from_zero(&mut rng, &[len])], 1e-3, fault, |t, v| {
        let y = t.relu(v[0])?;
        project(t, y, seed)
    })
}

pub fn sigmoid(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..40);
    check(&[rand_tensor(&mut rng, &[len])], 1e-3, fault, |t, v| {
        let y = t.sigmoid(v[0])?;
        project(t, y, seed)
    })
}

pub fn avg_pool(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let window = rng.gen_range(1..4);
    let stride = rng.gen_range(1..3);
    let hw = rng.gen_range(window..8);
    let shape = [rng.gen_range(1..3), rng.gen_range(1..3), hw, hw];
    check(&[rand_tensor(&mut rng, &shape)], 1e-3, fault, |t, v| {
        let y = t.avg_pool2d(v[0], window, stride)?;
        project(t, y, seed)
    })
}

fn rand_nchw(rng: &mut ChaCha8Rng) -> Tensor {
    let shape = [rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..5), rng.gen_range(1..5)];
    rand_tensor(rng, &shape)
}

pub fn global_pool(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check(&[rand_nchw(&mut rng)], 1e-3, fault, |t, v| {
        let y = t.global_avg_pool(v[0])?;
        project(t, y, seed)
    })
}

pub fn channel_mean(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = rand_nchw(&mut rng);
    let channel = rng.gen_range(0..x.shape()[1]);
    check(&[x], 1e-3, fault, |t, v| t.channel_mean(v[0], channel))
}

pub fn concat(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, h, w) = (rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(1..4));
    let count = rng.gen_range(1..4);
    let parts: Vec<Tensor> = (0..count)
        .map(|_| {
            let c = rng.gen_range(1..4);
            rand_tensor(&mut rng, &[n, c, h, w])
        })
        .collect();
    check(&parts, 1e-3, fault, |t, v| {
        let y = t.concat_channels(v)?;
        project(t, y, seed)
    })
}

pub fn dropout(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..40);
    let x = rand_tensor(&mut rng, &[len]);
    check(&[x], 1e-3, fault, |t, v| {
        let mut drng = ChaCha8Rng::seed_from_u64(seed + 1);
        let y = t.dropout(v[0], 0.3, true, &mut drng)?;
        project(t, y, seed)
    })
}

pub fn bce(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..9);
    let p = Tensor::new(&[n, 1], (0..n).map(|_| rng.gen_range(0.05f32..0.95)).collect()).unwrap();
    let labels = Tensor::new(&[n, 1], (0..n).map(|_| rng.gen_range(0..2) as f32).collect()).unwrap();
    check(&[p], 1e-3, fault, |t, v| {
        let y = t.constant(labels.clone())?;
        t.bce_loss(v[0], y)
    })
}

pub fn mul_reshape(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = rng.gen_range(1..30);
    let a = rand_tensor(&mut rng, &[len]);
    let b = rand_tensor(&mut rng, &[len]);
    check(&[a, b], 1e-3, fault, |t, v| {
        let y = t.mul(v[0], v[1])?;
        let y = t.reshape(y, &[1, len])?;
        project(t, y, seed)
    })
}

/// conv -> relu -> pool -> dense -> sigmoid -> BCE.
pub fn composite(seed: u64, fault: Option<&'static str>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = [
        rand_tensor(&mut rng, &[2, 1, 6, 6]),
        rand_tensor(&mut rng, &[3, 1, 3, 3]),
        rand_tensor(&mut rng, &[3]),
        rand_tensor(&mut rng, &[3, 1]),
        rand_tensor(&mut rng, &[1]),
    ];
    check(&leaves, 1e-6, fault, |t, v| {
        let y = t.conv2d(v[0], v[1], v[2], 1, 1)?;
        let y = t.relu(y)?;
        let y = t.global_avg_pool(y)?;
        let y = t.dense(y, v[3], v[4])?;
        let p = t.sigmoid(y)?;
        let labels = t.constant(Tensor::new(&[2, 1], vec![1.0, 0.0]).unwrap())?;
        t.bce_loss(p, labels)
    })
}

/// A 16x16 mini-DenseNet under BCE with dropout active.
///
/// The denominator is floored at 1e-3 of the largest checked gradient: the
/// analytic pass runs in f32 through a deep chain, so coordinates a thousand
/// times smaller than the rest carry rounding noise of that relative size.
pub fn mini_model(seed: u64, fault: Option<&'static str>) -> f64 {
    let cfg = DenseNetConfig {
        input_size: 16,
        stem_filters: 4,
        growth_rate: 2,
        block_layout: vec![1, 1],
        ..Default::default()
    };
    let model = Model::build(cfg, Init::FanIn { seed }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Tensor::new(&[2, 1, 16, 16], (0..512).map(|_| rng.gen()).collect()).unwrap();
    // Zero biases put dead units exactly on the ReLU kink, where finite
    // differences see a half slope. Offset them to a differentiable point.
    let leaves: Vec<Tensor> = model
        .params()
        .iter()
        .map(|p| {
            if p.name.ends_with("bias") {
                let data = (0..p.tensor.len()).map(|_| rng.gen_range(-0.2..0.2)).collect();
                Tensor::new(p.tensor.shape(), data).unwrap()
            } else {
                p.tensor.clone()
            }
        })
        .collect();
    let opts = GradCheckOptions { eps: 1e-6, max_per_leaf: Some(4), seed, fault, scale_floor: 1e-3 };
    grad_check_with(&leaves, &opts, |t, v| {
        let input = t.constant(x.clone())?;
        let mut drop_rng = ChaCha8Rng::seed_from_u64(seed);
        let logits = model.forward_tape(t, v, input, true, &mut drop_rng).map_err(|e| match e {
            ModelError::Tensor(e) => e,
            e => panic!("{e}"),
        })?;
        let p = t.sigmoid(logits)?;
        let labels = t.constant(Tensor::new(&[2, 1], vec![1.0, 0.0]).unwrap())?;
        t.bce_loss(p, labels)
    })
    .unwrap()
    .max_rel_error
}
