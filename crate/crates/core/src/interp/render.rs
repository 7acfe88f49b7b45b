use rayon::prelude::*;

use super::{maximize_filter, AscentConfig, AscentResult, InterpError, Result, SaliencyMap};
use crate::data::pnm::quantize;
use crate::data::SampleImage;
use crate::model::Model;

pub const OVERLAY_ALPHA: f32 = 0.5;
const SEPARATOR: [u8; 3] = [255, 255, 255];

/// Linear blue (0) to red (1).
pub fn colormap(v: f32) -> [f32; 3] {
    let v = v.clamp(0.0, 1.0);
    [v, 0.0, 1.0 - v]
}

/// Max-normalized map through the colormap, alpha-blended over the grayscale base.
pub fn render_heatmap(map: &SaliencyMap, base: &SampleImage) -> Result<Vec<[u8; 3]>> {
    if (map.width, map.height) != (base.width, base.height) {
        return Err(InterpError::Shape(format!(
            "map {}x{} over image {}x{}",
            map.width, map.height, base.width, base.height
        )));
    }
    Ok(map
        .normalized()
        .iter()
        .zip(&base.pixels)
        .map(|(&v, &g)| {
            let c = colormap(v);
            [0, 1, 2].map(|i| quantize(OVERLAY_ALPHA * c[i] + (1.0 - OVERLAY_ALPHA) * g))
        })
        .collect())
}

/// One synthesized input per filter of a layer.
#[derive(Clone, Debug)]
pub struct FilterPanel {
    pub layer: String,
    pub filters: Vec<AscentResult>,
}

impl FilterPanel {
    pub fn tile(&self) -> (usize, usize) {
        self.filters.first().map_or((0, 0), |f| (f.width, f.height))
    }

    /// A near-square grid: `cols = ceil(sqrt(n))`.
    pub fn default_grid(&self) -> (usize, usize) {
        let n = self.filters.len().max(1);
        let cols = (n as f64).sqrt().ceil() as usize;
        (cols, n.div_ceil(cols))
    }
}

/// Runs activation maximization for every filter of `layer` on `jobs` threads.
pub fn filter_panel(model: &Model, layer: &str, cfg: &AscentConfig, jobs: usize) -> Result<FilterPanel> {
    let spec = model.resolve_conv(layer)?;
    let run = |f: usize| maximize_filter(model, &spec.name, f, cfg);
    let filters = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| InterpError::Config(format!("thread pool: {e}")))?;
        pool.install(|| (0..spec.filters).into_par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        (0..spec.filters).map(run).collect::<Result<Vec<_>>>()?
    };
    Ok(FilterPanel { layer: spec.name, filters })
}

/// Tiles filters row-major with 1-pixel separators; returns (width, height, rgb).
pub fn render_panel(panel: &FilterPanel, cols: usize, rows: usize) -> Result<(usize, usize, Vec<[u8; 3]>)> {
    let n = panel.filters.len();
    if cols * rows < n {
        return Err(InterpError::Grid { cells: cols * rows, filters: n });
    }
    let (tw, th) = panel.tile();
    let width = cols * (tw + 1) + 1;
    let height = rows * (th + 1) + 1;
    let mut rgb = vec![SEPARATOR; width * height];
    for (i, f) in panel.filters.iter().enumerate() {
        let (gx, gy) = (i % cols, i / cols);
        let (ox, oy) = (1 + gx * (tw + 1), 1 + gy * (th + 1));
        for y in 0..th {
            for x in 0..tw {
                let g = quantize(f.image[y * tw + x]);
                rgb[(oy + y) * width + ox + x] = [g, g, g];
            }
        }
    }
    Ok((width, height, rgb))
}
