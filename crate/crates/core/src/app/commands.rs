use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{AppError, RunConfig};
use crate::data::pnm::{save_pgm, save_ppm};
use crate::data::{generate_dataset, load_dataset, mask_path, write_dataset, Label, SampleImage, SynthParams};
use crate::eval::{
    cross_validate, curve_csv, pooled_csv, predictions_csv, report_csv, roc_svg, CrossValConfig, FoldReport, Metric,
};
use crate::interp::{filter_panel, render_heatmap, render_panel, saliency, saliency_probe, FilterPanel};
use crate::model::{load_checkpoint, Model};
use crate::train::{pretext_pretrain, Regime, TrainConfig};

type Result<T> = std::result::Result<T, AppError>;

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    fs::write(path, contents).map_err(|e| AppError::Runtime(format!("{}: {e}", path.display())))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::Runtime(format!("{}: {e}", dir.display())))
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(AppError::missing(path, "no such file"))
    }
}

/// Validates the config and records it, defaults included, in the output directory.
fn prepare(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    write_file(&cfg.out.join("resolved.cfg"), cfg.to_text())
}

fn synth_params(cfg: &RunConfig) -> SynthParams {
    SynthParams { seed: cfg.seed, ..cfg.synth.clone() }
}

/// Synthesizes the dataset into `<out>/data`; returns the manifest path and the images.
pub fn cmd_synth(cfg: &RunConfig) -> Result<(PathBuf, Vec<SampleImage>)> {
    prepare(cfg)?;
    let images = generate_dataset(&synth_params(cfg))?;
    let manifest = write_dataset(&images, &cfg.out.join("data"))?;
    log::info!(
        "synthesized {} loose and {} well_fixed images into {}",
        cfg.synth.loose_count,
        cfg.synth.well_fixed_count,
        manifest.display()
    );
    Ok((manifest, images))
}

fn pretrain_into(cfg: &RunConfig) -> Result<(PathBuf, f64)> {
    let (model, report) = pretext_pretrain(&cfg.model, &cfg.pretext)?;
    let path = cfg.out.join("backbone.ckpt");
    model.save_backbone(&path)?;
    write_file(&cfg.out.join("logs").join("pretext_history.csv"), report.history.to_csv())?;
    log::info!("pretext backbone written to {} (held-out accuracy {:.3})", path.display(), report.holdout_accuracy);
    Ok((path, report.holdout_accuracy))
}

/// Trains the pretext backbone; returns its checkpoint path and held-out accuracy.
pub fn cmd_pretrain(cfg: &RunConfig) -> Result<(PathBuf, f64)> {
    prepare(cfg)?;
    pretrain_into(cfg)
}

#[derive(Clone, Debug)]
pub struct CrossvalSummary {
    pub mean_auc: Vec<(Regime, Metric)>,
    /// Present when both regimes ran.
    pub comparison: Option<String>,
}

fn load_or_synthesize(cfg: &RunConfig) -> Result<Vec<SampleImage>> {
    match &cfg.data {
        Some(manifest) => {
            require(manifest)?;
            load_dataset(manifest).map_err(|e| AppError::missing(manifest, e))
        }
        None => {
            let images = generate_dataset(&synth_params(cfg))?;
            write_dataset(&images, &cfg.out.join("data"))?;
            Ok(images)
        }
    }
}

fn heatmap(dir: &Path, name: &str, model: &Model, image: &SampleImage) -> Result<()> {
    let map = saliency(model, image)?;
    let rgb = render_heatmap(&map, image)?;
    save_ppm(&dir.join(format!("{name}.ppm")), image.width, image.height, &rgb)?;
    Ok(())
}

fn write_regime(cfg: &RunConfig, dataset: &[SampleImage], report: &FoldReport) -> Result<()> {
    let dir = cfg.out.join(report.regime.as_str());
    write_file(&dir.join("report.csv"), report_csv(report))?;
    write_file(&dir.join("pooled.csv"), pooled_csv(report))?;
    write_file(&dir.join("predictions.csv"), predictions_csv(report))?;
    write_file(&dir.join("mean_roc.csv"), curve_csv(&report.mean_curve))?;
    write_file(&dir.join("roc.svg"), roc_svg(report, None))?;
    let sal = dir.join("saliency");
    ensure_dir(&sal)?;
    for f in &report.folds {
        let n = f.fold + 1;
        f.model.save(&dir.join(format!("fold_{n}.ckpt")))?;
        write_file(&dir.join("logs").join(format!("fold_{n}_history.csv")), f.history.to_csv())?;
        for (epoch, snap) in &f.history.snapshots {
            let path = dir.join("snapshots").join(format!("fold_{n}_epoch_{epoch}.ckpt"));
            write_file(&path, snap.to_checkpoint_bytes())?;
        }
        // One loose validation image per fold, and the epoch probe on the first fold.
        let Some(image) = f
            .validation_ids
            .iter()
            .filter_map(|id| dataset.iter().find(|i| &i.id == id))
            .find(|i| i.label == Label::Loose)
        else {
            continue;
        };
        heatmap(&sal, &format!("fold_{n}_{}", image.id), &f.model, image)?;
        if f.fold == 0 {
            for map in saliency_probe(&f.history.snapshots, &cfg.probe_epochs, image)? {
                let rgb = render_heatmap(&map, image)?;
                save_ppm(
                    &sal.join(format!("probe_{}_epoch_{}.ppm", image.id, map.epoch)),
                    image.width,
                    image.height,
                    &rgb,
                )?;
            }
        }
    }
    Ok(())
}

/// Cross-validates each configured regime and writes one report directory per regime.
pub fn cmd_crossval(cfg: &RunConfig) -> Result<CrossvalSummary> {
    prepare(cfg)?;
    let regimes = cfg.regime.regimes();
    let backbone = if regimes.contains(&Regime::Pretrained) {
        Some(match &cfg.backbone {
            Some(path) => {
                require(path)?;
                path.clone()
            }
            None => pretrain_into(cfg)?.0,
        })
    } else {
        None
    };
    let dataset = load_or_synthesize(cfg)?;

    let mut summary = CrossvalSummary { mean_auc: Vec::new(), comparison: None };
    for regime in regimes {
        let cv = CrossValConfig {
            k: cfg.k,
            seed: cfg.seed,
            stratified: cfg.stratified,
            model: cfg.model.clone(),
            train: TrainConfig {
                epochs: cfg.epochs,
                batch_size: cfg.batch_size,
                lr: cfg.lr,
                regime,
                seed: cfg.seed,
                augment: cfg.augment.clone(),
                snapshot_epochs: cfg.probe_epochs.clone(),
            },
            backbone: backbone.clone(),
            jobs: cfg.jobs,
            threshold: cfg.threshold,
        };
        let report = cross_validate(&dataset, &cv).map_err(|e| match AppError::from(e) {
            AppError::Fold { fold, msg } => AppError::Fold { fold: fold + 1, msg },
            other => other,
        })?;
        log::info!("{regime}: mean AUC {:.4}", report.mean_auc);
        write_regime(cfg, &dataset, &report)?;
        summary.mean_auc.push((regime, report.mean_auc));
    }
    if let [(Regime::Pretrained, p), (Regime::Retrained, r)] = summary.mean_auc[..] {
        let mut line = format!("comparison: pretrained mean AUC {p:.4} vs retrained mean AUC {r:.4}");
        if let (Some(p), Some(r)) = (p.value(), r.value()) {
            let _ = write!(line, " (difference {:+.4})", p - r);
        }
        write_file(&cfg.out.join("comparison.txt"), format!("{line}\n"))?;
        summary.comparison = Some(line);
    }
    Ok(summary)
}

fn load_model(path: &Path) -> Result<Model> {
    require(path)?;
    load_checkpoint(path).map_err(|e| AppError::missing(path, e))
}

/// Heatmap for one PGM image. Returns the heatmap path and, when a
/// `<stem>_mask.pgm` sits next to the image, the top-1% overlap with it.
pub fn cmd_saliency(cfg: &RunConfig, checkpoint: &Path, image: &Path) -> Result<(PathBuf, Option<f64>)> {
    prepare(cfg)?;
    let model = load_model(checkpoint)?;
    require(image)?;
    let (w, h, pixels) = crate::data::pnm::load_pgm(image).map_err(|e| AppError::missing(image, e))?;
    let id = image.file_stem().map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    // The label plays no part in a saliency map.
    let sample = SampleImage::new(id.clone(), Label::WellFixed, w, h, pixels)?;
    let map = saliency(&model, &sample)?;
    let dir = cfg.out.join("saliency");
    ensure_dir(&dir)?;
    let out = dir.join(format!("{id}.ppm"));
    save_ppm(&out, w, h, &render_heatmap(&map, &sample)?)?;
    save_pgm(&dir.join(format!("{id}_map.pgm")), w, h, &map.normalized())?;

    let mp = mask_path(image);
    let overlap = if mp.is_file() {
        let (mw, mh, m) = crate::data::pnm::load_pgm(&mp).map_err(|e| AppError::missing(&mp, e))?;
        if (mw, mh) != (w, h) {
            return Err(AppError::missing(&mp, format!("mask is {mw}x{mh}, image is {w}x{h}")));
        }
        let mask: Vec<bool> = m.iter().map(|&v| v >= 0.5).collect();
        Some(map.top_fraction_in(&mask, 0.01))
    } else {
        None
    };
    Ok((out, overlap))
}

/// Activation-maximization panel for every filter of `layer`.
pub fn cmd_filters(cfg: &RunConfig, checkpoint: &Path, layer: &str) -> Result<(PathBuf, FilterPanel)> {
    prepare(cfg)?;
    let model = load_model(checkpoint)?;
    let panel = filter_panel(&model, layer, &cfg.ascent, 1)?;
    let (cols, rows) = panel.default_grid();
    let (w, h, rgb) = render_panel(&panel, cols, rows)?;
    let tag: String = layer.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    let out = cfg.out.join(format!("filters_{tag}.ppm"));
    save_ppm(&out, w, h, &rgb)?;
    let mut csv = String::from("filter,initial_activation,final_activation\n");
    for f in &panel.filters {
        let _ = writeln!(csv, "{},{:.6},{:.6}", f.filter, f.initial(), f.last());
    }
    write_file(&cfg.out.join(format!("filters_{tag}.csv")), csv)?;
    log::info!("{} filters of {} rendered to {}", panel.filters.len(), panel.layer, out.display());
    Ok((out, panel))
}
