//! Parametric hip radiographs: femur and pelvis over textured soft tissue,
//! a bright tapered stem with neck, head and acetabular cup, and for the
//! loose class a dark band hugging the implant boundary.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{DataError, Label, Result, SampleImage};
use crate::rng::{substream_indexed, Stream};

const MAX_ATTEMPTS: usize = 10;
const IMPLANT: f32 = 0.92;
const FEMUR_MARGIN: f32 = 9.0;

/// Closed interval `[lo, hi]` for a sampled geometry parameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    pub lo: f32,
    pub hi: f32,
}

impl Range {
    pub const fn new(lo: f32, hi: f32) -> Self {
        Range { lo, hi }
    }

    fn sample(self, rng: &mut Stream) -> f32 {
        if self.hi > self.lo {
            rng.gen_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    /// Pulls both ends a fraction of the way towards the midpoint.
    fn shrink(self, frac: f32) -> Self {
        let mid = 0.5 * (self.lo + self.hi);
        Range { lo: self.lo + (mid - self.lo) * frac, hi: self.hi - (self.hi - mid) * frac }
    }

    fn valid(self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }
}

/// Generator settings. Lengths are in pixels at a 64 px frame and scale with `image_size`.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthParams {
    pub image_size: usize,
    pub stem_length: Range,
    pub stem_width: Range,
    /// Tip width as a fraction of the top width.
    pub stem_taper: Range,
    pub stem_angle_deg: Range,
    pub cup_radius: Range,
    /// Amplitude of the bone texture.
    pub noise_scale: f32,
    /// Lucency band width in pixels (loose class).
    pub lucency_width: Range,
    /// Intensity drop inside the band.
    pub lucency_contrast: f32,
    pub loose_count: usize,
    pub well_fixed_count: usize,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            image_size: 64,
            stem_length: Range::new(26.0, 36.0),
            stem_width: Range::new(7.0, 10.0),
            stem_taper: Range::new(0.35, 0.55),
            stem_angle_deg: Range::new(-8.0, 8.0),
            cup_radius: Range::new(7.0, 9.5),
            noise_scale: 0.06,
            lucency_width: Range::new(2.0, 4.0),
            lucency_contrast: 0.25,
            loose_count: 100,
            well_fixed_count: 100,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::Params(m));
        if self.loose_count == 0 || self.well_fixed_count == 0 {
            return bad(format!(
                "per-class counts must be at least 1 (loose {}, well_fixed {})",
                self.loose_count, self.well_fixed_count
            ));
        }
        if self.image_size < 32 {
            return bad(format!("image_size {} below 32", self.image_size));
        }
        for (name, r) in [
            ("stem_length", self.stem_length),
            ("stem_width", self.stem_width),
            ("stem_taper", self.stem_taper),
            ("stem_angle_deg", self.stem_angle_deg),
            ("cup_radius", self.cup_radius),
            ("lucency_width", self.lucency_width),
        ] {
            if !r.valid() {
                return bad(format!("{name} range [{}, {}] is empty", r.lo, r.hi));
            }
        }
        if self.lucency_width.lo <= 0.0 {
            return bad(format!("lucency width must be positive for the loose class, got {}", self.lucency_width.lo));
        }
        if self.stem_length.lo <= 0.0 || self.stem_width.lo <= 0.0 || self.cup_radius.lo <= 0.0 {
            return bad("stem and cup sizes must be positive".into());
        }
        if !(self.stem_taper.lo > 0.0 && self.stem_taper.hi <= 1.0) {
            return bad("stem_taper must lie in (0, 1]".into());
        }
        if !(self.lucency_contrast > 0.0 && self.lucency_contrast < 1.0) {
            return bad(format!("lucency_contrast {} outside (0, 1)", self.lucency_contrast));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale < 0.5) {
            return bad(format!("noise_scale {} outside [0, 0.5)", self.noise_scale));
        }
        Ok(())
    }

    fn shrunk(&self, frac: f32) -> Self {
        SynthParams {
            stem_length: self.stem_length.shrink(frac),
            stem_width: self.stem_width.shrink(frac),
            stem_angle_deg: self.stem_angle_deg.shrink(frac),
            cup_radius: self.cup_radius.shrink(frac),
            ..self.clone()
        }
    }
}

/// Loose images first, then well-fixed; each image draws from its own sub-stream.
pub fn generate_dataset(params: &SynthParams) -> Result<Vec<SampleImage>> {
    params.validate()?;
    let mut out = Vec::with_capacity(params.loose_count + params.well_fixed_count);
    for (label, count) in [(Label::Loose, params.loose_count), (Label::WellFixed, params.well_fixed_count)] {
        for i in 0..count {
            out.push(generate_one(params, label, i)?);
        }
    }
    Ok(out)
}

fn generate_one(params: &SynthParams, label: Label, index: usize) -> Result<SampleImage> {
    let id = format!("{}_{index:03}", label.as_str());
    let mut rng = substream_indexed(params.seed, &format!("synth.{}", label.as_str()), index as u64);
    let mut p = params.clone();
    for attempt in 0..MAX_ATTEMPTS {
        let scene = Scene::sample(&p, label, &mut rng);
        if scene.in_frame(params.image_size as f32) {
            return Ok(scene.render(&p, id, label, &mut rng));
        }
        log::debug!("{id}: geometry left the frame on attempt {}", attempt + 1);
        p = p.shrunk(0.5);
    }
    Err(DataError::Geometry(MAX_ATTEMPTS))
}

struct Scene {
    scale: f32,
    /// Top centre of the stem.
    top: (f32, f32),
    /// Unit vector down the stem axis.
    axis: (f32, f32),
    length: f32,
    half_top: f32,
    half_tip: f32,
    head: (f32, f32),
    cup_radius: f32,
    band: Option<Band>,
}

struct Band {
    width: f32,
    /// Covered span of the stem axis, as fractions of its length.
    span: (f32, f32),
    around_cup: bool,
}

impl Scene {
    fn sample(p: &SynthParams, label: Label, rng: &mut Stream) -> Scene {
        let s = p.image_size as f32 / 64.0;
        let top = (rng.gen_range(33.0..39.0) * s, rng.gen_range(17.0..22.0) * s);
        let angle = p.stem_angle_deg.sample(rng).to_radians();
        let length = p.stem_length.sample(rng) * s;
        let half_top = 0.5 * p.stem_width.sample(rng) * s;
        let half_tip = half_top * p.stem_taper.sample(rng);
        let head = (top.0 - rng.gen_range(9.0..12.0) * s, top.1 - rng.gen_range(5.0..8.0) * s);
        let cup_radius = p.cup_radius.sample(rng) * s;
        let band = (label == Label::Loose).then(|| {
            let covered = rng.gen_range(0.6..=1.0f32);
            let start = rng.gen_range(0.0..=1.0 - covered);
            Band {
                width: p.lucency_width.sample(rng) * s,
                span: (start, start + covered),
                around_cup: rng.gen_bool(0.5),
            }
        });
        Scene { scale: s, top, axis: (angle.sin(), angle.cos()), length, half_top, half_tip, head, cup_radius, band }
    }

    fn in_frame(&self, size: f32) -> bool {
        let pad = self.band.as_ref().map_or(0.0, |b| b.width) + 2.0 * self.scale;
        let tip = (self.top.0 + self.axis.0 * self.length, self.top.1 + self.axis.1 * self.length);
        let reach = self.cup_radius + pad;
        let inside = |x: f32, y: f32, r: f32| x - r >= 0.0 && y - r >= 0.0 && x + r < size && y + r < size;
        inside(tip.0, tip.1, self.half_tip + pad)
            && inside(self.top.0, self.top.1, self.half_top + pad)
            && inside(self.head.0, self.head.1, reach)
    }

    /// Axial fraction t and signed distance outside the tapered stem outline.
    fn stem_distance(&self, x: f32, y: f32) -> (f32, f32) {
        let (dx, dy) = (x - self.top.0, y - self.top.1);
        let along = dx * self.axis.0 + dy * self.axis.1;
        let across = (dx * self.axis.1 - dy * self.axis.0).abs();
        let t = along / self.length;
        if t > 1.0 {
            let tip_d = ((along - self.length).powi(2) + across.powi(2)).sqrt();
            return (t, tip_d - self.half_tip);
        }
        let half = self.half_top + (self.half_tip - self.half_top) * t.max(0.0);
        (t, across - half)
    }

    fn render(&self, p: &SynthParams, id: String, label: Label, rng: &mut Stream) -> SampleImage {
        let n = p.image_size;
        let s = self.scale;
        let tissue = smooth_noise(n, (4.0 * s) as usize, rng);
        let texture = smooth_noise(n, s.ceil() as usize, rng);
        let exposure = rng.gen_range(-0.04..0.04f32);
        let femur_half = self.half_top + FEMUR_MARGIN * s;
        let neck_half = 2.0 * s;
        let pelvis = (self.head.0 - 2.0 * s, self.head.1 - 5.0 * s);

        let mut pixels = vec![0f32; n * n];
        let mut mask = self.band.as_ref().map(|_| vec![false; n * n]);
        for yi in 0..n {
            for xi in 0..n {
                let (x, y) = (xi as f32 + 0.5, yi as f32 + 0.5);
                let k = yi * n + xi;
                let mut v = 0.18 + exposure + 0.5 * p.noise_scale * tissue[k];

                // Pelvis and femur share the bone texture; the femur runs off the bottom edge.
                let pe = ((x - pelvis.0) / (24.0 * s)).powi(2) + ((y - pelvis.1) / (15.0 * s)).powi(2);
                let (t, d) = self.stem_distance(x, y);
                let across = {
                    let (dx, dy) = (x - self.top.0, y - self.top.1);
                    (dx * self.axis.1 - dy * self.axis.0).abs()
                };
                let femur = y >= self.top.1 - 2.0 * s && across <= femur_half;
                if pe <= 1.0 || femur {
                    v = 0.5 + exposure + p.noise_scale * texture[k];
                    if femur && across > femur_half - 2.5 * s {
                        v += 0.15;
                    }
                }

                let dh = ((x - self.head.0).powi(2) + (y - self.head.1).powi(2)).sqrt();
                let implant = {
                    let stem = t >= 0.0 && d <= 0.0;
                    let ball = dh <= self.cup_radius - 2.5 * s;
                    let shell = dh <= self.cup_radius && dh >= self.cup_radius - 2.0 * s && y <= self.head.1 + 1.0 * s;
                    let neck = segment_distance((x, y), self.head, self.top) <= neck_half;
                    stem || ball || shell || neck
                };
                if implant {
                    v = IMPLANT + 0.02 * texture[k];
                } else if let Some(band) = &self.band {
                    let reaches_tip = band.span.1 >= 1.0 && t > 1.0;
                    let stem_band = d > 0.0 && d <= band.width && t >= band.span.0 && (t <= band.span.1 || reaches_tip);
                    let cup_band = band.around_cup
                        && dh > self.cup_radius
                        && dh <= self.cup_radius + band.width
                        && y <= self.head.1;
                    if stem_band || cup_band {
                        v -= p.lucency_contrast;
                        mask.as_mut().unwrap()[k] = true;
                    }
                }
                pixels[k] = v.clamp(0.0, 1.0);
            }
        }
        SampleImage { id, label, width: n, height: n, pixels, lucency_mask: mask }
    }
}

fn segment_distance(p: (f32, f32), a: (f32, f32), b: (f32, f32)) -> f32 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((p.0 - a.0 - t * vx).powi(2) + (p.1 - a.1 - t * vy).powi(2)).sqrt()
}

/// Box-blurred Gaussian noise rescaled to unit standard deviation.
pub(crate) fn smooth_noise(n: usize, radius: usize, rng: &mut Stream) -> Vec<f32> {
    let raw: Vec<f32> = (0..n * n).map(|_| rng.sample::<f32, _>(StandardNormal)).collect();
    let blurred = box_blur(&raw, n, radius);
    let mean = blurred.iter().sum::<f32>() / blurred.len() as f32;
    let var = blurred.iter().map(|v| (v - mean).powi(2)).sum::<f32>() / blurred.len() as f32;
    let sd = var.sqrt().max(1e-6);
    blurred.iter().map(|v| (v - mean) / sd).collect()
}

fn box_blur(src: &[f32], n: usize, radius: usize) -> Vec<f32> {
    if radius == 0 {
        return src.to_vec();
    }
    let pass = |src: &[f32], horizontal: bool| {
        let mut out = vec![0f32; n * n];
        for a in 0..n {
            for b in 0..n {
                let lo = b.saturating_sub(radius);
                let hi = (b + radius).min(n - 1);
                let mut acc = 0.0;
                for c in lo..=hi {
                    acc += if horizontal { src[a * n + c] } else { src[c * n + a] };
                }
                let idx = if horizontal { a * n + b } else { b * n + a };
                out[idx] = acc / (hi - lo + 1) as f32;
            }
        }
        out
    };
    pass(&pass(src, true), false)
}

/// Mean just outside the lucency mask (a ring of `width` pixels, square
/// dilation) minus the mean inside it. `None` when there is no mask.
pub fn ring_contrast(image: &SampleImage, width: usize) -> Option<f64> {
    let mask = image.lucency_mask.as_ref()?;
    let (w, h) = (image.width, image.height);
    let r = width.max(1) as isize;
    let (mut inside, mut n_in, mut ring, mut n_ring) = (0f64, 0usize, 0f64, 0usize);
    for y in 0..h {
        for x in 0..w {
            let k = y * w + x;
            if mask[k] {
                inside += image.pixels[k] as f64;
                n_in += 1;
                continue;
            }
            let near = (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (yy, xx) = (y as isize + dy, x as isize + dx);
                    yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w && mask[yy as usize * w + xx as usize]
                })
            });
            if near {
                ring += image.pixels[k] as f64;
                n_ring += 1;
            }
        }
    }
    if n_in == 0 || n_ring == 0 {
        return None;
    }
    Some(ring / n_ring as f64 - inside / n_in as f64)
}
