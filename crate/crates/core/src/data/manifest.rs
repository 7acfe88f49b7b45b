//! CSV manifest `path,label,id`. Paths are relative to the manifest's directory.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::pnm::{load_pgm, save_pgm};
use super::{DataError, Label, Result, SampleImage};

const HEADER: [&str; 3] = ["path", "label", "id"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRecord {
    pub path: String,
    pub label: Label,
    pub id: String,
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io { path: path.to_path_buf(), source },
        other => {
            let line = match &other {
                csv::ErrorKind::UnequalLengths { pos: Some(p), .. } => p.line(),
                csv::ErrorKind::Utf8 { pos: Some(p), .. } => p.line(),
                _ => 0,
            };
            DataError::Manifest { line, msg: format!("{other:?}") }
        }
    }
}

pub fn write_manifest(records: &[ManifestRecord], path: &Path) -> Result<()> {
    let mut seen = HashSet::new();
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.path.as_str())) {
        return Err(DataError::Params(format!("duplicate manifest path {}", dup.path)));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(HEADER).map_err(|e| csv_err(path, e))?;
    for r in records {
        w.write_record([r.path.as_str(), r.label.as_str(), r.id.as_str()]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| DataError::Io { path: path.to_path_buf(), source })
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::None)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut saw_header = false;
    for (i, row) in rdr.records().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 {
            if row.iter().ne(HEADER) {
                return Err(DataError::Manifest { line, msg: format!("header must be path,label,id, found {row:?}") });
            }
            saw_header = true;
            continue;
        }
        if row.len() != 3 {
            return Err(DataError::Manifest { line, msg: format!("expected 3 fields, found {}", row.len()) });
        }
        let label = Label::parse(&row[1])
            .ok_or_else(|| DataError::Manifest { line, msg: format!("unknown label {:?}", &row[1]) })?;
        if !seen.insert(row[0].to_string()) {
            return Err(DataError::Manifest { line, msg: format!("duplicate path {}", &row[0]) });
        }
        out.push(ManifestRecord { path: row[0].to_string(), label, id: row[2].to_string() });
    }
    if !saw_header {
        return Err(DataError::Manifest { line: 1, msg: "missing header".into() });
    }
    Ok(out)
}

pub(crate) fn mask_path(image: &Path) -> PathBuf {
    let stem = image.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    image.with_file_name(format!("{stem}_mask.pgm"))
}

/// Writes `images/<id>.pgm`, `images/<id>_mask.pgm` for masked images, and `manifest.csv`.
/// Returns the manifest path.
pub fn write_dataset(images: &[SampleImage], dir: &Path) -> Result<PathBuf> {
    let img_dir = dir.join("images");
    fs::create_dir_all(&img_dir).map_err(|source| DataError::Io { path: img_dir.clone(), source })?;
    let mut records = Vec::with_capacity(images.len());
    for img in images {
        let rel = format!("images/{}.pgm", img.id);
        let path = dir.join(&rel);
        save_pgm(&path, img.width, img.height, &img.pixels)?;
        if let Some(mask) = &img.lucency_mask {
            let m: Vec<f32> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            save_pgm(&mask_path(&path), img.width, img.height, &m)?;
        }
        records.push(ManifestRecord { path: rel, label: img.label, id: img.id.clone() });
    }
    let manifest = dir.join("manifest.csv");
    write_manifest(&records, &manifest)?;
    Ok(manifest)
}

/// Loads every image listed in a manifest, with its mask when one sits alongside.
pub fn load_dataset(manifest: &Path) -> Result<Vec<SampleImage>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut out = Vec::new();
    for r in read_manifest(manifest)? {
        let path = base.join(&r.path);
        let (width, height, pixels) = load_pgm(&path)?;
        let mut img = SampleImage { id: r.id, label: r.label, width, height, pixels, lucency_mask: None };
        let mp = mask_path(&path);
        if mp.exists() {
            let (mw, mh, m) = load_pgm(&mp)?;
            if (mw, mh) != (width, height) {
                return Err(DataError::Image {
                    path: mp,
                    msg: format!("mask is {mw}x{mh}, image is {width}x{height}"),
                });
            }
            img.lucency_mask = Some(m.iter().map(|&v| v >= 0.5).collect());
        }
        img.validate()?;
        out.push(img);
    }
    Ok(out)
}
