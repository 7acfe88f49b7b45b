//! Acceptance suite: runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails. The end-to-end criteria drive the `lucenet`
//! binary on the standard configuration, so a full run takes several minutes.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use common::grad::{self, worst, OP_CASES, TOL};
use lucenet::data::pnm::{decode_pgm, encode_pgm, encode_ppm, load_pgm, load_ppm, save_pgm, save_ppm};
use lucenet::data::{load_dataset, read_manifest, DataError, Label, SampleImage};
use lucenet::eval::{accuracy, make_folds, roc_curve, sensitivity, specificity, trapezoid, ConfusionCounts};
use lucenet::interp::{filter_panel, saliency, AscentConfig};
use lucenet::model::{load_checkpoint, DenseNetConfig, Init, Model, ModelError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- criterion 1

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn criterion_1() -> Outcome {
    let full = ConfusionCounts::new(16, 1, 22, 1);
    let metrics = |c: &ConfusionCounts| {
        [sensitivity(c), specificity(c), accuracy(c)].map(|m| round2(m.value().expect("defined")))
    };
    let got = metrics(&full);
    ensure(got == [0.94, 0.96, 0.95], || format!("(16,1,22,1) gave {got:?}"))?;
    let reader = ConfusionCounts::new(9, 1, 22, 8);
    let got2 = metrics(&reader);
    ensure(got2[..2] == [0.53, 0.96], || format!("(9,1,22,8) gave {got2:?}"))?;
    Ok(format!("sens/spec/acc {got:?}; {:?}", &got2[..2]))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let mut detail = Vec::new();
    for &(name, case) in OP_CASES {
        let w = worst(|seed| case(seed, None));
        ensure(w <= TOL, || format!("{name}: max relative error {w:.3e}"))?;
        let faulty = worst(|seed| case(seed, Some(name)));
        ensure(faulty > 0.1, || format!("{name}: corrupted backward rule passed ({faulty:.3e})"))?;
        detail.push(w);
    }
    let ops_worst = detail.iter().cloned().fold(0.0, f64::max);
    let composite = worst(|seed| grad::composite(seed, None));
    ensure(composite <= TOL, || format!("composite: {composite:.3e}"))?;
    let model = worst(|seed| grad::mini_model(seed, None));
    ensure(model <= TOL, || format!("mini model: {model:.3e}"))?;
    let control = grad::mini_model(3, Some("conv2d"));
    ensure(control > 0.1, || format!("mini model with corrupted conv2d backward passed ({control:.3e})"))?;
    Ok(format!(
        "{} ops worst {ops_worst:.2e}, composite {composite:.2e}, mini model {model:.2e}; fault control {control:.2}",
        OP_CASES.len()
    ))
}

// ---------------------------------------------------------------- criterion 3

/// Mann-Whitney statistic over all positive/negative pairs, ties counting half.
fn pairwise_oracle(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_diff = 0.0f64;
    let mut tied = 0;
    for _ in 0..500 {
        let n = rng.gen_range(2..=200);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
        labels[0] = true;
        labels[1] = false;
        // A third of the instances draw from a handful of levels.
        let levels = if rng.gen_range(0..3) == 0 { Some(rng.gen_range(1..5)) } else { None };
        let scores: Vec<f64> = (0..n)
            .map(|_| match levels {
                Some(l) => rng.gen_range(0..l) as f64 / 4.0,
                None => rng.gen(),
            })
            .collect();
        tied += levels.is_some() as usize;
        let curve = roc_curve(&scores, &labels).map_err(|e| e.to_string())?;
        let oracle = pairwise_oracle(&scores, &labels);
        let diff = (curve.auc - oracle).abs().max((trapezoid(&curve.points) - oracle).abs());
        worst_diff = worst_diff.max(diff);
    }
    ensure(worst_diff <= 1e-12, || format!("trapezoid and pairwise differ by {worst_diff:e}"))?;
    Ok(format!("500 instances ({tied} heavy-tie), max difference {worst_diff:.1e}"))
}

// ---------------------------------------------------------------- criterion 4

fn spread(counts: impl Iterator<Item = usize>) -> usize {
    let v: Vec<usize> = counts.collect();
    v.iter().max().unwrap() - v.iter().min().unwrap()
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut stratified_draws = 0;
    for draw in 0..1000 {
        let k = rng.gen_range(2..=10);
        let n = rng.gen_range(k..=200);
        let stratified = rng.gen::<bool>();
        let p = rng.gen_range(0.1..0.9);
        let labels: Vec<Label> =
            (0..n).map(|_| if rng.gen_bool(p) { Label::Loose } else { Label::WellFixed }).collect();
        let seed = rng.gen();
        let per_class = |c: Label| labels.iter().filter(|&&l| l == c).count();
        let feasible = per_class(Label::Loose) >= k && per_class(Label::WellFixed) >= k;
        let split = match make_folds(&labels, k, seed, stratified) {
            Ok(s) => s,
            Err(_) if stratified && !feasible => continue,
            Err(e) => return Err(format!("draw {draw}: n={n} k={k}: {e}")),
        };
        let mut seen = vec![0usize; n];
        for fold in &split.validation {
            for &i in fold {
                seen[i] += 1;
            }
        }
        ensure(seen.iter().all(|&c| c == 1), || format!("draw {draw}: folds not a partition"))?;
        ensure(spread(split.validation.iter().map(Vec::len)) <= 1, || format!("draw {draw}: fold sizes unbalanced"))?;
        for f in 0..k {
            let train: BTreeSet<usize> = split.train(f).into_iter().collect();
            ensure(split.validation[f].iter().all(|i| !train.contains(i)), || format!("draw {draw}: fold {f} leaks"))?;
            ensure(train.len() + split.validation[f].len() == n, || {
                format!("draw {draw}: fold {f} train set incomplete")
            })?;
        }
        if stratified {
            stratified_draws += 1;
            for class in [Label::Loose, Label::WellFixed] {
                let counts = split.validation.iter().map(|f| f.iter().filter(|&&i| labels[i] == class).count());
                ensure(spread(counts) <= 1, || format!("draw {draw}: {class:?} not stratified"))?;
            }
        }
    }
    Ok(format!("1000 draws ({stratified_draws} stratified) partitioned, balanced and leak-free"))
}

// ------------------------------------------------------- end-to-end benchmark

const SEEDS: [u64; 3] = [0, 1, 2];

struct Bench {
    root: PathBuf,
    /// Output directory per seed.
    runs: Vec<PathBuf>,
    /// Rerun of seed 0 with the same configuration.
    rerun: PathBuf,
    /// Mean AUC per seed: (pretrained, retrained).
    aucs: Vec<(f64, f64)>,
    elapsed: f64,
}

fn lucenet(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lucenet")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "lucenet {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn mean_auc(stdout: &str, regime: &str) -> Result<f64, String> {
    let prefix = format!("{regime} mean AUC ");
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| format!("no {regime} AUC in output:\n{stdout}"))
}

fn crossval(out: &Path, seed: u64, config: Option<&Path>) -> Result<(f64, f64), String> {
    let seed = seed.to_string();
    let mut args = vec!["--out", out.to_str().unwrap(), "--seed", &seed, "--jobs", "1"];
    if let Some(c) = config {
        args.extend(["--config", c.to_str().unwrap()]);
    }
    args.push("crossval");
    let stdout = lucenet(&args)?;
    Ok((mean_auc(&stdout, "pretrained")?, mean_auc(&stdout, "retrained")?))
}

fn run_bench() -> Result<Bench, String> {
    let start = Instant::now();
    let root = std::env::temp_dir().join(format!("lucenet-acceptance-{}", std::process::id()));
    let _ = fs::remove_dir_all(&root);
    fs::create_dir_all(&root).map_err(|e| e.to_string())?;

    // Seed 0 twice, each training its own pretext backbone inline; the copy
    // is moved aside so both runs write to the same output path.
    let run0 = root.join("seed0");
    let rerun = root.join("seed0_rerun");
    crossval(&run0, 0, None)?;
    fs::rename(&run0, &rerun).map_err(|e| e.to_string())?;
    let first = crossval(&run0, 0, None)?;

    let cfg = root.join("bench.cfg");
    let backbone = run0.join("backbone.ckpt");
    fs::write(&cfg, format!("paths.backbone = {}\n", backbone.display())).map_err(|e| e.to_string())?;
    let mut runs = vec![run0];
    let mut aucs = vec![first];
    for seed in &SEEDS[1..] {
        let dir = root.join(format!("seed{seed}"));
        aucs.push(crossval(&dir, *seed, Some(&cfg))?);
        runs.push(dir);
    }
    Ok(Bench { root, runs, rerun, aucs, elapsed: start.elapsed().as_secs_f64() })
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap().flatten() {
            let path = entry.path();
            let rel = path.strip_prefix(dir).unwrap().to_path_buf();
            // Wall-clock fields live in run.log and logs/.
            if rel == Path::new("run.log") || rel.components().any(|c| c.as_os_str() == "logs") {
                continue;
            }
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5(bench: &Bench) -> Outcome {
    let a = files(&bench.rerun);
    let b = files(&bench.runs[0]);
    let names_a: BTreeSet<_> = a.keys().collect();
    let names_b: BTreeSet<_> = b.keys().collect();
    ensure(names_a == names_b, || {
        format!("file sets differ: {:?}", names_a.symmetric_difference(&names_b).collect::<Vec<_>>())
    })?;
    let differing: Vec<_> = a.iter().filter(|(k, v)| b[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    ensure(differing.is_empty(), || format!("differing files: {differing:?}"))?;
    let count = |ext: &str| a.keys().filter(|p| p.extension().is_some_and(|e| e == ext)).count();
    Ok(format!(
        "{} files bit-identical ({} checkpoints, {} csv, {} images)",
        a.len(),
        count("ckpt"),
        count("csv"),
        count("ppm") + count("pgm")
    ))
}

// ---------------------------------------------------------------- criterion 6

/// Every sample is scored exactly once across the folds of a regime.
fn check_predictions(dir: &Path, manifest: &Path) -> Result<BTreeMap<usize, Vec<String>>, String> {
    let ids: BTreeSet<String> = read_manifest(manifest).map_err(|e| e.to_string())?.into_iter().map(|r| r.id).collect();
    let mut by_fold: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let text = fs::read_to_string(dir.join("predictions.csv")).map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    for line in text.lines().skip(1) {
        let mut cols = line.split(',');
        let fold: usize = cols.next().and_then(|f| f.parse().ok()).ok_or("bad fold column")?;
        let id = cols.next().ok_or("missing id")?.to_string();
        ensure(seen.insert(id.clone()), || format!("{id} scored twice"))?;
        by_fold.entry(fold).or_default().push(id);
    }
    ensure(seen == ids, || format!("{}: predictions do not cover the dataset", dir.display()))?;
    Ok(by_fold)
}

fn criterion_6(bench: &Bench) -> Outcome {
    for run in &bench.runs {
        for regime in ["pretrained", "retrained"] {
            let folds = check_predictions(&run.join(regime), &run.join("data/manifest.csv"))?;
            ensure(folds.len() == 5, || format!("{}: {} folds", run.display(), folds.len()))?;
        }
    }
    let n = bench.aucs.len() as f64;
    let pre = bench.aucs.iter().map(|a| a.0).sum::<f64>() / n;
    let re = bench.aucs.iter().map(|a| a.1).sum::<f64>() / n;
    let detail = format!("pretrained {pre:.3} vs retrained {re:.3} over 3 seeds ({:.0} s)", bench.elapsed);
    ensure(pre >= 0.90 && pre > re, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- criterion 7

fn overlap(model: &Model, image: &SampleImage) -> Result<f64, String> {
    let mask = image.lucency_mask.as_ref().ok_or_else(|| format!("{} has no mask", image.id))?;
    let map = saliency(model, image).map_err(|e| e.to_string())?;
    Ok(map.top_fraction_in(mask, 0.01))
}

fn load(path: &Path) -> Result<Model, String> {
    load_checkpoint(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn criterion_7(bench: &Bench) -> Outcome {
    let (mut localized, mut total) = (0, 0);
    let (mut early, mut late) = (0.0, 0.0);
    for run in &bench.runs {
        let dir = run.join("pretrained");
        let manifest = run.join("data/manifest.csv");
        let dataset = load_dataset(&manifest).map_err(|e| e.to_string())?;
        for (fold, ids) in check_predictions(&dir, &manifest)? {
            let model = load(&dir.join(format!("fold_{fold}.ckpt")))?;
            let epoch1 = load(&dir.join(format!("snapshots/fold_{fold}_epoch_1.ckpt")))?;
            let epoch10 = load(&dir.join(format!("snapshots/fold_{fold}_epoch_10.ckpt")))?;
            for id in ids {
                let image = dataset.iter().find(|i| i.id == id).unwrap();
                if image.label != Label::Loose {
                    continue;
                }
                let area = image.mask_area() as f64 / (image.width * image.height) as f64;
                total += 1;
                localized += (overlap(&model, image)? >= 3.0 * area) as usize;
                early += overlap(&epoch1, image)?;
                late += overlap(&epoch10, image)?;
            }
        }
    }
    let frac = localized as f64 / total as f64;
    let (early, late) = (early / total as f64, late / total as f64);
    let detail = format!(
        "{localized}/{total} loose validation images localized at >=3x area; probe overlap epoch 1 {early:.3} -> epoch 10 {late:.3}"
    );
    ensure(frac >= 0.70 && late > early, || detail.clone())?;
    Ok(detail)
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8(bench: &Bench) -> Outcome {
    let model = load(&bench.runs[0].join("pretrained/fold_1.ckpt"))?;
    let cfg = AscentConfig::default();
    let mut checked = 0;
    for layer in ["first", "last"] {
        let panel = filter_panel(&model, layer, &cfg, 1).map_err(|e| e.to_string())?;
        for f in &panel.filters {
            ensure(f.trace.windows(2).all(|w| w[1] >= w[0]), || {
                format!("{} filter {}: trace decreases", f.layer, f.filter)
            })?;
            ensure(f.last() > f.initial(), || {
                format!("{} filter {}: final {} <= initial {}", f.layer, f.filter, f.last(), f.initial())
            })?;
            checked += 1;
        }
    }

    // Wide configuration at reduced input size and step count.
    let dir = bench.root.join("wide");
    let cfg_path = bench.root.join("wide.cfg");
    fs::write(
        &cfg_path,
        "model.stem_filters = 64\nmodel.growth_rate = 32\nmodel.input_size = 32\nsynth.image_size = 32\n\
         synth.loose_count = 10\nsynth.well_fixed_count = 10\ncrossval.k = 2\ntrain.epochs = 1\n\
         train.regime = pretrained\nsaliency.probe_epochs = 1\npretext.count = 40\npretext.epochs = 1\n\
         filters.steps = 16\n",
    )
    .map_err(|e| e.to_string())?;
    let (out, cfg_arg) = (dir.to_str().unwrap(), cfg_path.to_str().unwrap());
    lucenet(&["--out", out, "--config", cfg_arg, "crossval"])?;
    let ckpt = dir.join("pretrained/fold_1.ckpt");
    let mut tiles = Vec::new();
    for (layer, expected, width) in [("first", 64, 265), ("last", 32, 199)] {
        lucenet(&[
            "--out",
            out,
            "--config",
            cfg_arg,
            "filters",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--layer",
            layer,
        ])?;
        let rows =
            fs::read_to_string(dir.join(format!("filters_{layer}.csv"))).map_err(|e| e.to_string())?.lines().count()
                - 1;
        let (w, h, _) = load_ppm(&dir.join(format!("filters_{layer}.ppm"))).map_err(|e| e.to_string())?;
        ensure(rows == expected && (w, h) == (width, width), || {
            format!("{layer}: {rows} tiles in a {w}x{h} panel, expected {expected} in {width}x{width}")
        })?;
        tiles.push(rows);
    }
    Ok(format!("{checked} filters ascend monotonically; wide panels hold {} and {} tiles", tiles[0], tiles[1]))
}

// ---------------------------------------------------------------- criterion 9

/// Swaps the two dims of the named 2-D parameter record in checkpoint bytes.
fn swap_dims(bytes: &mut [u8], target: &str) -> bool {
    let u32_at = |b: &[u8], p: usize| u32::from_le_bytes(b[p..p + 4].try_into().unwrap()) as usize;
    let mut pos = 8;
    pos += 4 + u32_at(bytes, pos);
    while pos < bytes.len() {
        let name_len = u32_at(bytes, pos);
        let name = String::from_utf8_lossy(&bytes[pos + 4..pos + 4 + name_len]).into_owned();
        pos += 4 + name_len;
        let ndim = u32_at(bytes, pos);
        let dims: Vec<usize> = (0..ndim).map(|i| u32_at(bytes, pos + 4 + 4 * i)).collect();
        if name == target && ndim == 2 && dims[0] != dims[1] {
            bytes[pos + 4..pos + 8].copy_from_slice(&(dims[1] as u32).to_le_bytes());
            bytes[pos + 8..pos + 12].copy_from_slice(&(dims[0] as u32).to_le_bytes());
            return true;
        }
        pos += 4 + 4 * ndim + 4 * dims.iter().product::<usize>();
    }
    false
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    let pixels: Vec<f32> = (0..37 * 23).map(|_| rng.gen()).collect();
    save_pgm(&p("a.pgm"), 37, 23, &pixels).map_err(|e| e.to_string())?;
    let (w, h, back) = load_pgm(&p("a.pgm")).map_err(|e| e.to_string())?;
    let err = pixels.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
    ensure((w, h) == (37, 23) && err <= 1.0 / 255.0, || format!("PGM error {err}"))?;
    ensure(encode_pgm(w, h, &back) == fs::read(p("a.pgm")).unwrap(), || "PGM re-save not idempotent".into())?;
    let rgb: Vec<[u8; 3]> = (0..11 * 7).map(|_| rng.gen()).collect();
    save_ppm(&p("a.ppm"), 11, 7, &rgb).map_err(|e| e.to_string())?;
    let (pw, ph, rgb_back) = load_ppm(&p("a.ppm")).map_err(|e| e.to_string())?;
    ensure(rgb_back == rgb && encode_ppm(pw, ph, &rgb_back) == fs::read(p("a.ppm")).unwrap(), || {
        "PPM round trip".into()
    })?;

    let small = DenseNetConfig {
        input_size: 16,
        stem_filters: 4,
        growth_rate: 2,
        block_layout: vec![2, 2],
        ..Default::default()
    };
    let model = Model::build(small.clone(), Init::Gaussian { seed: 9, std: 0.05 }).map_err(|e| e.to_string())?;
    model.save(&p("m.ckpt")).map_err(|e| e.to_string())?;
    load(&p("m.ckpt"))?.save(&p("m2.ckpt")).map_err(|e| e.to_string())?;
    let bytes = fs::read(p("m.ckpt")).unwrap();
    ensure(bytes == fs::read(p("m2.ckpt")).unwrap(), || "checkpoint save-load-save differs".into())?;

    let corrupt = |name: &str, data: &[u8]| {
        fs::write(p(name), data).unwrap();
        load_checkpoint(&p(name))
    };
    let mut errors = Vec::new();
    let r = corrupt("trunc.ckpt", &bytes[..bytes.len() - 1]);
    ensure(matches!(r, Err(ModelError::Truncated(_))), || format!("truncated checkpoint: {:?}", r.err()))?;
    errors.push("truncated payload");
    let mut bad = bytes.clone();
    bad[0] = b'X';
    let r = corrupt("magic.ckpt", &bad);
    ensure(matches!(r, Err(ModelError::BadMagic)), || format!("bad magic: {:?}", r.err()))?;
    errors.push("bad magic");
    let text = String::from_utf8_lossy(&bytes).into_owned();
    let at = text.find("format_version=1\n").ok_or("no version line")? + "format_version=".len();
    let mut bad = bytes.clone();
    bad[at] = b'7';
    let r = corrupt("version.ckpt", &bad);
    ensure(matches!(r, Err(ModelError::VersionMismatch { .. })), || format!("version: {:?}", r.err()))?;
    errors.push("version mismatch");
    let mut bad = bytes.clone();
    ensure(swap_dims(&mut bad, "head.dense1.weight"), || "no head.dense1.weight record".into())?;
    let r = corrupt("shape.ckpt", &bad);
    ensure(matches!(r, Err(ModelError::ShapeDisagreement { .. })), || format!("shape: {:?}", r.err()))?;
    errors.push("shape disagreement");
    let wider = DenseNetConfig { block_layout: vec![3, 3], ..small };
    let r = Model::build(wider, Init::FromCheckpoint { path: p("m.ckpt"), seed: 0 });
    ensure(matches!(r, Err(ModelError::ConfigMismatch(_))), || format!("layout mismatch: {:?}", r.err()))?;
    errors.push("config mismatch");

    let pgm = encode_pgm(4, 4, &[0.5; 16]);
    for (name, data) in
        [("short.pgm", &pgm[..pgm.len() - 1]), ("magic.pgm", &[b"P2".as_slice(), &pgm[2..]].concat()[..])]
    {
        fs::write(p(name), data).unwrap();
        let r = load_pgm(&p(name));
        ensure(matches!(r, Err(DataError::Image { .. })), || format!("{name}: {:?}", r.err()))?;
        ensure(decode_pgm(data).is_err(), || format!("{name} decoded"))?;
    }
    errors.push("malformed image");
    fs::write(p("m.csv"), "path,label,id\na.pgm,loose,a\nb.pgm,Loose ,b\n").unwrap();
    let r = read_manifest(&p("m.csv"));
    ensure(matches!(r, Err(DataError::Manifest { line: 3, .. })), || format!("manifest: {:?}", r.err()))?;
    errors.push("manifest line");
    Ok(format!("PGM max error {err:.4}, checkpoint bytes stable, errors: {}", errors.join(", ")))
}

// ---------------------------------------------------------------------- main

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("criterion {n} {name}: PASS ({detail}) [{secs:.1} s]"),
        Err(detail) => println!("criterion {n} {name}: FAIL ({detail}) [{secs:.1} s]"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filtered runs expect a quick answer.
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut ok = true;
    ok &= report(1, "metric arithmetic", criterion_1);
    ok &= report(2, "gradient correctness", criterion_2);
    ok &= report(3, "AUC oracle", criterion_3);
    ok &= report(4, "fold partitions", criterion_4);
    match run_bench() {
        Ok(bench) => {
            ok &= report(5, "determinism", || criterion_5(&bench));
            ok &= report(6, "synthetic benchmark", || criterion_6(&bench));
            ok &= report(7, "saliency localization", || criterion_7(&bench));
            ok &= report(8, "activation maximization", || criterion_8(&bench));
            let _ = fs::remove_dir_all(&bench.root);
        }
        Err(e) => {
            for (n, name) in [
                (5, "determinism"),
                (6, "synthetic benchmark"),
                (7, "saliency localization"),
                (8, "activation maximization"),
            ] {
                println!("criterion {n} {name}: FAIL (benchmark run failed: {e})");
            }
            ok = false;
        }
    }
    ok &= report(9, "format round-trips", criterion_9);
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
