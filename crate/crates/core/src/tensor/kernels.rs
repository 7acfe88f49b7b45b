//! Loop kernels shared by the tape (`f32`) and the gradient checker (`f64`).

use num_traits::Float;

use super::{Result, TensorError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub f: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub pad: usize,
    pub oh: usize,
    pub ow: usize,
}

impl ConvGeom {
    pub fn new(input: [usize; 4], kernel: [usize; 4], stride: usize, pad: usize) -> Result<Self> {
        let [n, c, h, w] = input;
        let [f, kc, kh, kw] = kernel;
        if kc != c {
            return Err(TensorError::Shape {
                op: "conv2d",
                detail: format!("kernel expects {kc} input channels, input has {c}"),
            });
        }
        if stride == 0 {
            return Err(TensorError::Shape { op: "conv2d", detail: "stride must be positive".into() });
        }
        let (ph, pw) = (h + 2 * pad, w + 2 * pad);
        if kh > ph || kw > pw {
            return Err(TensorError::EmptyOutput {
                op: "conv2d",
                detail: format!("kernel {kh}x{kw} larger than padded input {ph}x{pw}"),
            });
        }
        let oh = (ph - kh) / stride + 1;
        let ow = (pw - kw) / stride + 1;
        Ok(ConvGeom { n, c, h, w, f, kh, kw, stride, pad, oh, ow })
    }

    /// Output columns `lo..hi` whose input column `ox*stride + kj - pad` is in bounds.
    #[inline]
    fn col_range(&self, kj: usize) -> (usize, usize) {
        range_for(kj, self.pad, self.stride, self.w, self.ow)
    }

    #[inline]
    fn row_range(&self, ki: usize) -> (usize, usize) {
        range_for(ki, self.pad, self.stride, self.h, self.oh)
    }
}

#[inline]
fn range_for(k: usize, pad: usize, stride: usize, size: usize, out: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    // largest o with o*stride + k - pad <= size - 1
    let top = size - 1 + pad;
    if top < k {
        return (0, 0);
    }
    let hi = ((top - k) / stride + 1).min(out);
    (lo.min(hi), hi)
}

pub(crate) fn conv2d_forward<F: Float>(g: &ConvGeom, input: &[F], kernel: &[F], bias: &[F]) -> Vec<F> {
    let (ihw, ohw) = (g.h * g.w, g.oh * g.ow);
    let mut out = vec![F::zero(); g.n * g.f * ohw];
    for n in 0..g.n {
        for f in 0..g.f {
            let o = &mut out[(n * g.f + f) * ohw..][..ohw];
            o.fill(bias[f]);
            for c in 0..g.c {
                let plane = &input[(n * g.c + c) * ihw..][..ihw];
                for ki in 0..g.kh {
                    let (y0, y1) = g.row_range(ki);
                    for kj in 0..g.kw {
                        let wv = kernel[((f * g.c + c) * g.kh + ki) * g.kw + kj];
                        let (x0, x1) = g.col_range(kj);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ki - g.pad;
                            let orow = &mut o[oy * g.ow..][..g.ow];
                            let irow = &plane[iy * g.w..][..g.w];
                            if g.stride == 1 {
                                let ix0 = x0 + kj - g.pad;
                                for (ov, &iv) in orow[x0..x1].iter_mut().zip(&irow[ix0..ix0 + (x1 - x0)]) {
                                    *ov = *ov + wv * iv;
                                }
                            } else {
                                for ox in x0..x1 {
                                    orow[ox] = orow[ox] + wv * irow[ox * g.stride + kj - g.pad];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv2d_grad_input(g: &ConvGeom, kernel: &[f32], dout: &[f32]) -> Vec<f32> {
    let (ihw, ohw) = (g.h * g.w, g.oh * g.ow);
    let mut din = vec![0.0f32; g.n * g.c * ihw];
    for n in 0..g.n {
        for f in 0..g.f {
            let d = &dout[(n * g.f + f) * ohw..][..ohw];
            for c in 0..g.c {
                let plane = &mut din[(n * g.c + c) * ihw..][..ihw];
                for ki in 0..g.kh {
                    let (y0, y1) = g.row_range(ki);
                    for kj in 0..g.kw {
                        let wv = kernel[((f * g.c + c) * g.kh + ki) * g.kw + kj];
                        let (x0, x1) = g.col_range(kj);
                        if x0 >= x1 {
                            continue;
                        }
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ki - g.pad;
                            let drow = &d[oy * g.ow..][..g.ow];
                            let irow = &mut plane[iy * g.w..][..g.w];
                            if g.stride == 1 {
                                let ix0 = x0 + kj - g.pad;
                                for (iv, &dv) in irow[ix0..ix0 + (x1 - x0)].iter_mut().zip(&drow[x0..x1]) {
                                    *iv += wv * dv;
                                }
                            } else {
                                for ox in x0..x1 {
                                    irow[ox * g.stride + kj - g.pad] += wv * drow[ox];
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    din
}

pub(crate) fn conv2d_grad_kernel(g: &ConvGeom, input: &[f32], dout: &[f32]) -> Vec<f32> {
    let (ihw, ohw) = (g.h * g.w, g.oh * g.ow);
    let mut dk = vec![0.0f32; g.f * g.c * g.kh * g.kw];
    for n in 0..g.n {
        for f in 0..g.f {
            let d = &dout[(n * g.f + f) * ohw..][..ohw];
            for c in 0..g.c {
                let plane = &input[(n * g.c + c) * ihw..][..ihw];
                for ki in 0..g.kh {
                    let (y0, y1) = g.row_range(ki);
                    for kj in 0..g.kw {
                        let (x0, x1) = g.col_range(kj);
                        if x0 >= x1 {
                            continue;
                        }
                        let mut acc = 0.0f32;
                        for oy in y0..y1 {
                            let iy = oy * g.stride + ki - g.pad;
                            let drow = &d[oy * g.ow..][..g.ow];
                            let irow = &plane[iy * g.w..][..g.w];
                            if g.stride == 1 {
                                let ix0 = x0 + kj - g.pad;
                                acc += dot(&drow[x0..x1], &irow[ix0..ix0 + (x1 - x0)]);
                            } else {
                                for ox in x0..x1 {
                                    acc += drow[ox] * irow[ox * g.stride + kj - g.pad];
                                }
                            }
                        }
                        dk[((f * g.c + c) * g.kh + ki) * g.kw + kj] += acc;
                    }
                }
            }
        }
    }
    dk
}

pub(crate) fn conv2d_grad_bias(g: &ConvGeom, dout: &[f32]) -> Vec<f32> {
    let ohw = g.oh * g.ow;
    let mut db = vec![0.0f32; g.f];
    for n in 0..g.n {
        for (f, slot) in db.iter_mut().enumerate() {
            *slot += dout[(n * g.f + f) * ohw..][..ohw].iter().sum::<f32>();
        }
    }
    db
}

/// Eight-lane dot product; the split accumulators let the compiler vectorize.
#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0.0f32; 8];
    let chunks = a.len() / 8;
    for i in 0..chunks {
        for l in 0..8 {
            acc[l] += a[i * 8 + l] * b[i * 8 + l];
        }
    }
    let mut s: f32 = acc.iter().sum();
    for i in chunks * 8..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) fn dense_forward<F: Float>(n: usize, d: usize, m: usize, x: &[F], w: &[F], b: &[F]) -> Vec<F> {
    let mut out = Vec::with_capacity(n * m);
    for row in 0..n {
        let start = out.len();
        out.extend_from_slice(b);
        let orow = &mut out[start..start + m];
        for k in 0..d {
            let xv = x[row * d + k];
            if xv == F::zero() {
                continue;
            }
            for (o, &wv) in orow.iter_mut().zip(&w[k * m..(k + 1) * m]) {
                *o = *o + xv * wv;
            }
        }
    }
    out
}

pub(crate) fn dense_grad_input(n: usize, d: usize, m: usize, w: &[f32], dy: &[f32]) -> Vec<f32> {
    let mut dx = vec![0.0f32; n * d];
    for row in 0..n {
        let dyr = &dy[row * m..(row + 1) * m];
        for k in 0..d {
            dx[row * d + k] = dot(&w[k * m..(k + 1) * m], dyr);
        }
    }
    dx
}

pub(crate) fn dense_grad_weights(n: usize, d: usize, m: usize, x: &[f32], dy: &[f32]) -> Vec<f32> {
    let mut dw = vec![0.0f32; d * m];
    for row in 0..n {
        let dyr = &dy[row * m..(row + 1) * m];
        for k in 0..d {
            let xv = x[row * d + k];
            if xv == 0.0 {
                continue;
            }
            for (g, &dv) in dw[k * m..(k + 1) * m].iter_mut().zip(dyr) {
                *g += xv * dv;
            }
        }
    }
    dw
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct PoolGeom {
    pub n: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub window: usize,
    pub stride: usize,
    pub oh: usize,
    pub ow: usize,
}

impl PoolGeom {
    pub fn new(shape: [usize; 4], window: usize, stride: usize) -> Result<Self> {
        let [n, c, h, w] = shape;
        if window == 0 || stride == 0 {
            return Err(TensorError::Shape { op: "avg_pool2d", detail: "window and stride must be positive".into() });
        }
        if window > h || window > w {
            return Err(TensorError::EmptyOutput {
                op: "avg_pool2d",
                detail: format!("window {window} does not fit {h}x{w}"),
            });
        }
        Ok(PoolGeom { n, c, h, w, window, stride, oh: (h - window) / stride + 1, ow: (w - window) / stride + 1 })
    }
}

pub(crate) fn avg_pool_forward<F: Float>(g: &PoolGeom, x: &[F]) -> Vec<F> {
    let scale = F::one() / F::from(g.window * g.window).unwrap();
    let mut out = vec![F::zero(); g.n * g.c * g.oh * g.ow];
    for p in 0..g.n * g.c {
        let plane = &x[p * g.h * g.w..][..g.h * g.w];
        let o = &mut out[p * g.oh * g.ow..][..g.oh * g.ow];
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let mut acc = F::zero();
                for dy in 0..g.window {
                    let row = &plane[(oy * g.stride + dy) * g.w + ox * g.stride..][..g.window];
                    for &v in row {
                        acc = acc + v;
                    }
                }
                o[oy * g.ow + ox] = acc * scale;
            }
        }
    }
    out
}

pub(crate) fn avg_pool_grad(g: &PoolGeom, dy: &[f32]) -> Vec<f32> {
    let scale = 1.0 / (g.window * g.window) as f32;
    let mut dx = vec![0.0f32; g.n * g.c * g.h * g.w];
    for p in 0..g.n * g.c {
        let plane = &mut dx[p * g.h * g.w..][..g.h * g.w];
        let d = &dy[p * g.oh * g.ow..][..g.oh * g.ow];
        for oy in 0..g.oh {
            for ox in 0..g.ow {
                let v = d[oy * g.ow + ox] * scale;
                for wy in 0..g.window {
                    for slot in &mut plane[(oy * g.stride + wy) * g.w + ox * g.stride..][..g.window] {
                        *slot += v;
                    }
                }
            }
        }
    }
    dx
}

/// Mean over each `[H, W]` plane: `[N, C, H, W] -> [N, C]`.
pub(crate) fn plane_mean<F: Float>(planes: usize, hw: usize, x: &[F]) -> Vec<F> {
    let scale = F::one() / F::from(hw).unwrap();
    (0..planes).map(|p| x[p * hw..(p + 1) * hw].iter().fold(F::zero(), |a, &v| a + v) * scale).collect()
}

pub(crate) fn concat_forward<F: Float>(n: usize, hw: usize, channels: &[usize], parts: &[&[F]]) -> Vec<F> {
    let total: usize = channels.iter().sum();
    let mut out = Vec::with_capacity(n * total * hw);
    for b in 0..n {
        for (part, &c) in parts.iter().zip(channels) {
            out.extend_from_slice(&part[b * c * hw..(b + 1) * c * hw]);
        }
    }
    out
}

pub(crate) fn sigmoid<F: Float>(v: F) -> F {
    if v >= F::zero() {
        F::one() / (F::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (F::one() + e)
    }
}

pub(crate) const PROB_CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy, accumulated in `f64`.
pub(crate) fn bce_forward<F: Float>(prob: &[F], label: &[F]) -> F {
    let mut acc = 0.0f64;
    for (&p, &y) in prob.iter().zip(label) {
        let p = p.to_f64().unwrap().clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = y.to_f64().unwrap();
        acc -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    F::from(acc / prob.len() as f64).unwrap()
}
