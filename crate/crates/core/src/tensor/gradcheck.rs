use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Result, Tape, Tensor, TensorError, Var};

pub const MAX_GRAD_CHECK_PARAMS: usize = 10_000;

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub eps: f64,
    /// Check at most this many randomly chosen coordinates per leaf.
    pub max_per_leaf: Option<usize>,
    pub seed: u64,
    /// Op whose backward rule is deliberately corrupted (negative controls).
    pub fault: Option<&'static str>,
    /// Floors the relative-error denominator at this fraction of the largest
    /// checked gradient magnitude. Zero keeps the plain coordinate-wise ratio.
    pub scale_floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions { eps: 1e-3, max_per_leaf: None, seed: 0, fault: None, scale_floor: 0.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max |analytic - numeric| / max(|analytic|, |numeric|, floor, 1e-8)
    pub max_rel_error: f64,
    pub checked: usize,
    /// (leaf index, coordinate, analytic, numeric) of the worst coordinate.
    pub worst: Option<(usize, usize, f64, f64)>,
}

pub fn grad_check<B>(leaves: &[Tensor], eps: f64, build: B) -> Result<GradCheckReport>
where
    B: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    grad_check_with(leaves, &GradCheckOptions { eps, ..Default::default() }, build)
}

/// Compares the tape's `f32` analytic gradients against central finite
/// differences. The finite differences replay the recorded graph in `f64`
/// so that rounding in the forward pass does not swamp the difference
/// quotient; dropout masks and other recorded randomness are reused.
pub fn grad_check_with<B>(leaves: &[Tensor], opts: &GradCheckOptions, build: B) -> Result<GradCheckReport>
where
    B: FnOnce(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let coords: Vec<Vec<usize>> = leaves
        .iter()
        .map(|t| match opts.max_per_leaf {
            Some(k) if k < t.len() => {
                let mut idx = sample(&mut rng, t.len(), k).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..t.len()).collect(),
        })
        .collect();
    let total: usize = coords.iter().map(Vec::len).sum();
    if total > MAX_GRAD_CHECK_PARAMS {
        return Err(TensorError::TooManyParameters(total, MAX_GRAD_CHECK_PARAMS));
    }

    let mut tape = Tape::new();
    if let Some(op) = opts.fault {
        tape.inject_backward_fault(op);
    }
    let vars = leaves.iter().map(|t| tape.param(t.clone())).collect::<Result<Vec<_>>>()?;
    let root = build(&mut tape, &vars)?;
    tape.backward(root)?;

    let mut pairs = Vec::with_capacity(total);
    for (li, (&var, leaf)) in vars.iter().zip(leaves).enumerate() {
        let analytic = tape.grad(var).map(|g| g.data().to_vec()).unwrap_or_else(|| vec![0.0; leaf.len()]);
        let mut buf: Vec<f64> = leaf.data().iter().map(|&v| v as f64).collect();
        for &ci in &coords[li] {
            let orig = buf[ci];
            buf[ci] = orig + opts.eps;
            let plus = tape.replay_f64(root, &[(var, &buf)]);
            buf[ci] = orig - opts.eps;
            let minus = tape.replay_f64(root, &[(var, &buf)]);
            buf[ci] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(TensorError::NonFinite { op: "grad_check", tensor: "perturbed forward" });
            }
            pairs.push((li, ci, analytic[ci] as f64, (plus - minus) / (2.0 * opts.eps)));
        }
    }

    let scale = pairs.iter().map(|p| p.2.abs().max(p.3.abs())).fold(0.0, f64::max);
    let floor = (opts.scale_floor * scale).max(1e-8);
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: pairs.len(), worst: None };
    for (li, ci, a, numeric) in pairs {
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = rel.max(report.max_rel_error);
            report.worst = Some((li, ci, a, numeric));
        }
    }
    Ok(report)
}
