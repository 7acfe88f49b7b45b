use rand::Rng;

use super::{DataError, Result, SampleImage};
use crate::rng::Stream;

/// Symmetric augmentation magnitudes; the identity lies inside every range.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentParams {
    /// Rotation drawn from `[-r, r]` degrees.
    pub rotation_deg: f32,
    pub scale_min: f32,
    pub scale_max: f32,
    /// Translation drawn from `[-f, f]` times the image side, per axis.
    pub translate_frac: f32,
    /// Additive intensity offset drawn from `[-j, j]`.
    pub intensity_jitter: f32,
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            rotation_deg: 5.0,
            scale_min: 0.9,
            scale_max: 1.1,
            translate_frac: 0.05,
            intensity_jitter: 0.05,
        }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        AugmentParams { rotation_deg: 0.0, scale_min: 1.0, scale_max: 1.0, translate_frac: 0.0, intensity_jitter: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rotation_deg >= 0.0
            && self.rotation_deg < 180.0
            && self.translate_frac >= 0.0
            && self.translate_frac < 0.5
            && self.intensity_jitter >= 0.0
            && self.intensity_jitter < 1.0
            && self.scale_min > 0.0
            && self.scale_min <= 1.0
            && self.scale_max >= 1.0
            && self.scale_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DataError::Params(format!("augmentation ranges must contain the identity: {self:?}")))
        }
    }

    pub fn sample(&self, width: usize, height: usize, rng: &mut Stream) -> Transform {
        fn sym(rng: &mut Stream, r: f32) -> f32 {
            if r > 0.0 {
                rng.gen_range(-r..=r)
            } else {
                0.0
            }
        }
        let scale = if self.scale_max > self.scale_min {
            rng.gen_range(self.scale_min..=self.scale_max)
        } else {
            self.scale_min
        };
        Transform {
            rotation_deg: sym(rng, self.rotation_deg),
            scale,
            tx: sym(rng, self.translate_frac) * width as f32,
            ty: sym(rng, self.translate_frac) * height as f32,
            intensity: sym(rng, self.intensity_jitter),
        }
    }
}

/// One concrete augmentation. Rotation and scale act about the image centre;
/// translation is in pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation_deg: f32,
    pub scale: f32,
    pub tx: f32,
    pub ty: f32,
    pub intensity: f32,
}

impl Transform {
    pub const IDENTITY: Transform = Transform { rotation_deg: 0.0, scale: 1.0, tx: 0.0, ty: 0.0, intensity: 0.0 };

    fn is_geometric_identity(&self) -> bool {
        self.rotation_deg == 0.0 && self.scale == 1.0 && self.tx == 0.0 && self.ty == 0.0
    }
}

/// Draws a transform and applies it. Label and id are carried through.
pub fn augment(image: &SampleImage, params: &AugmentParams, rng: &mut Stream) -> SampleImage {
    let t = params.sample(image.width, image.height, rng);
    apply_transform(image, &t)
}

pub fn apply_transform(image: &SampleImage, t: &Transform) -> SampleImage {
    let (w, h) = (image.width, image.height);
    let mut out = image.clone();
    if !t.is_geometric_identity() {
        let (cx, cy) = (0.5 * (w as f32 - 1.0), 0.5 * (h as f32 - 1.0));
        let (sin, cos) = t.rotation_deg.to_radians().sin_cos();
        // Inverse map: output pixel -> source coordinate.
        let source = |x: usize, y: usize| {
            let ux = (x as f32 - cx - t.tx) / t.scale;
            let uy = (y as f32 - cy - t.ty) / t.scale;
            (cx + cos * ux + sin * uy, cy - sin * ux + cos * uy)
        };
        let clamp_x = |v: isize| v.clamp(0, w as isize - 1) as usize;
        let clamp_y = |v: isize| v.clamp(0, h as isize - 1) as usize;
        for y in 0..h {
            for x in 0..w {
                let (sx, sy) = source(x, y);
                let (fx, fy) = (sx.floor(), sy.floor());
                let (ax, ay) = (sx - fx, sy - fy);
                let (x0, y0) = (fx as isize, fy as isize);
                let (xa, xb, ya, yb) = (clamp_x(x0), clamp_x(x0 + 1), clamp_y(y0), clamp_y(y0 + 1));
                let p = &image.pixels;
                let v = if ax == 0.0 && ay == 0.0 {
                    p[ya * w + xa]
                } else {
                    let top = p[ya * w + xa] * (1.0 - ax) + p[ya * w + xb] * ax;
                    let bottom = p[yb * w + xa] * (1.0 - ax) + p[yb * w + xb] * ax;
                    top * (1.0 - ay) + bottom * ay
                };
                out.pixels[y * w + x] = v;
                if let (Some(src), Some(dst)) = (&image.lucency_mask, out.lucency_mask.as_mut()) {
                    let (nx, ny) = (clamp_x(sx.round() as isize), clamp_y(sy.round() as isize));
                    dst[y * w + x] = src[ny * w + nx];
                }
            }
        }
    }
    if t.intensity != 0.0 {
        for v in &mut out.pixels {
            *v += t.intensity;
        }
    }
    for v in &mut out.pixels {
        *v = v.clamp(0.0, 1.0);
    }
    out
}
