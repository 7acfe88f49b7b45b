//! Stand-in for large-scale natural-image pretraining: detect a thin dark band
//! over textured backgrounds cluttered with bright bars, disks and step edges.

use rand::Rng;

use super::{fit, Regime, Result, TrainConfig, TrainError, TrainHistory};
use crate::data::{batch_tensor, AugmentParams, Label, SampleImage};
use crate::model::{DenseNetConfig, Init, Model};
use crate::rng::{substream_indexed, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct PretextConfig {
    pub count: usize,
    /// Fraction of images held out for the accuracy check.
    pub holdout: f32,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub noise_scale: f32,
    pub seed: u64,
}

impl Default for PretextConfig {
    fn default() -> Self {
        PretextConfig { count: 2000, holdout: 0.2, epochs: 6, batch_size: 8, lr: 1e-3, noise_scale: 0.06, seed: 0 }
    }
}

#[derive(Clone, Debug)]
pub struct PretextReport {
    pub holdout_accuracy: f64,
    pub history: TrainHistory,
}

/// A bar is a capsule: every point within `radius` of the segment `a`-`b`.
#[derive(Clone, Copy)]
struct Bar {
    a: (f32, f32),
    b: (f32, f32),
    radius: f32,
}

impl Bar {
    fn distance(&self, p: (f32, f32)) -> (f32, f32) {
        let (vx, vy) = (self.b.0 - self.a.0, self.b.1 - self.a.1);
        let len2 = vx * vx + vy * vy;
        let t = if len2 > 0.0 { (((p.0 - self.a.0) * vx + (p.1 - self.a.1) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
        let d = ((p.0 - self.a.0 - t * vx).powi(2) + (p.1 - self.a.1 - t * vy).powi(2)).sqrt();
        (t, d - self.radius)
    }

    fn random(rng: &mut Stream, n: f32, len: (f32, f32), radius: (f32, f32)) -> Bar {
        let a = (rng.gen_range(0.1 * n..0.9 * n), rng.gen_range(0.1 * n..0.9 * n));
        let angle = rng.gen_range(0.0..std::f32::consts::TAU);
        let l = rng.gen_range(len.0..len.1);
        Bar { a, b: (a.0 + l * angle.cos(), a.1 + l * angle.sin()), radius: rng.gen_range(radius.0..radius.1) }
    }
}

fn pretext_image(index: usize, size: usize, noise_scale: f32, seed: u64) -> SampleImage {
    let mut rng = substream_indexed(seed, "pretext.image", index as u64);
    let n = size as f32;
    let s = n / 64.0;
    let positive = index.is_multiple_of(2);
    let texture = crate::data::smooth_noise(size, s.ceil() as usize, &mut rng);
    let coarse = crate::data::smooth_noise(size, (5.0 * s) as usize, &mut rng);
    let base = rng.gen_range(0.25..0.55f32);
    let amp = noise_scale * rng.gen_range(0.5..1.5f32);
    // Both classes may carry a darker half-plane, so a plain step edge is not a band.
    let step = rng.gen_bool(0.5).then(|| {
        let angle = rng.gen_range(0.0..std::f32::consts::TAU);
        let offset = rng.gen_range(-0.3 * n..0.3 * n);
        (angle.cos(), angle.sin(), offset, rng.gen_range(0.1..0.3f32))
    });

    let shapes: Vec<(Bar, f32)> = (0..rng.gen_range(1..=3))
        .map(|i| {
            // The first shape is always a bar so a hugging band has an outline to follow.
            let bar = if i == 0 || rng.gen_bool(0.5) {
                Bar::random(&mut rng, n, (12.0 * s, 40.0 * s), (2.0 * s, 5.0 * s))
            } else {
                let mut disk = Bar::random(&mut rng, n, (0.0, 0.01), (4.0 * s, 9.0 * s));
                disk.b = disk.a;
                disk
            };
            (bar, rng.gen_range(0.75..0.95f32))
        })
        .collect();

    // Positives: either a band hugging part of a shape's outline or a free stroke.
    let width = rng.gen_range(2.0 * s..4.0 * s);
    let contrast = rng.gen_range(0.25..0.45f32);
    let hug = rng.gen_bool(0.5);
    let span = {
        let covered = rng.gen_range(0.5..=1.0f32);
        let start = rng.gen_range(0.0..=1.0 - covered);
        (start, start + covered)
    };
    let stroke = Bar::random(&mut rng, n, (15.0 * s, 35.0 * s), (0.5 * width, 0.5 * width + 0.01));

    let mut pixels = vec![0f32; size * size];
    for y in 0..size {
        for x in 0..size {
            let k = y * size + x;
            let p = (x as f32 + 0.5, y as f32 + 0.5);
            let mut v = base + amp * texture[k] + 0.5 * amp * coarse[k];
            if let Some((cx, cy, offset, drop)) = step {
                if (p.0 - 0.5 * n) * cx + (p.1 - 0.5 * n) * cy > offset {
                    v -= drop;
                }
            }
            let mut inside = false;
            for (bar, level) in &shapes {
                if bar.distance(p).1 <= 0.0 {
                    v = level + 0.3 * amp * texture[k];
                    inside = true;
                }
            }
            if positive && !inside {
                let banded = if hug {
                    let (t, d) = shapes[0].0.distance(p);
                    d > 0.0 && d <= width && t >= span.0 && t <= span.1
                } else {
                    stroke.distance(p).1 <= 0.0
                };
                if banded {
                    v -= contrast;
                }
            }
            pixels[k] = v.clamp(0.0, 1.0);
        }
    }
    let label = if positive { Label::Loose } else { Label::WellFixed };
    SampleImage { id: format!("pretext_{index:04}"), label, width: size, height: size, pixels, lucency_mask: None }
}

/// Alternating band / no-band images; band images carry the positive label.
pub fn generate_pretext(count: usize, size: usize, noise_scale: f32, seed: u64) -> Vec<SampleImage> {
    (0..count).map(|i| pretext_image(i, size, noise_scale, seed)).collect()
}

/// Trains a fresh network on the pretext task. The returned model carries
/// provenance regime `pretext`; save its backbone with [`Model::save_backbone`].
pub fn pretext_pretrain(config: &DenseNetConfig, pc: &PretextConfig) -> Result<(Model, PretextReport)> {
    if pc.count < 10 || !(pc.holdout > 0.0 && pc.holdout < 1.0) {
        return Err(TrainError::Config(format!(
            "pretext needs at least 10 images and a holdout in (0, 1), got {pc:?}"
        )));
    }
    let images = generate_pretext(pc.count, config.input_size, pc.noise_scale, pc.seed);
    let n_hold = ((pc.count as f32 * pc.holdout).round() as usize).clamp(2, pc.count - 2);
    let (held, train) = images.split_at(n_hold);

    let model = Model::build(config.clone(), Init::FanIn { seed: pc.seed })?;
    let cfg = TrainConfig {
        epochs: pc.epochs,
        batch_size: pc.batch_size,
        lr: pc.lr,
        regime: Regime::Retrained,
        seed: pc.seed,
        augment: AugmentParams::default(),
        snapshot_epochs: Vec::new(),
    };
    let (mut model, history) = fit(&model, train, &cfg)?;
    model.provenance.regime = "pretext".into();

    let mut correct = 0usize;
    for chunk in held.chunks(32) {
        let refs: Vec<&SampleImage> = chunk.iter().collect();
        let logits = model.predict(&batch_tensor(&refs))?;
        correct += chunk.iter().zip(logits.data()).filter(|(img, &z)| (z > 0.0) == (img.label == Label::Loose)).count();
    }
    let holdout_accuracy = correct as f64 / held.len() as f64;
    if holdout_accuracy < 0.8 {
        log::warn!("weak backbone: pretext held-out accuracy {holdout_accuracy:.3} below 0.8");
    } else {
        log::info!("pretext held-out accuracy {holdout_accuracy:.3}");
    }
    Ok((model, PretextReport { holdout_accuracy, history }))
}
