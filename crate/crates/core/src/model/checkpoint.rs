//! Binary checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic          8 bytes   "LUCENET1"
//! header_len     u32
//! header         UTF-8 key=value lines (format_version, config.*, provenance.*, params)
//! per parameter:
//!   name_len     u32
//!   name         UTF-8
//!   ndim         u32
//!   dims         ndim x u32
//!   payload      prod(dims) x f32
//! ```

use std::fs;
use std::path::Path;

use super::{param_layout, DenseNetConfig, Model, ModelError, Param, Provenance, Result};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LUCENET1";
pub const FORMAT_VERSION: u32 = 1;

/// Decoded checkpoint contents. May hold a subset of a model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: DenseNetConfig,
    pub provenance: Provenance,
    pub params: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn ensure_compatible(&self, config: &DenseNetConfig) -> Result<()> {
        let ours = self.config.to_pairs();
        let theirs = config.to_pairs();
        for ((key, a), (_, b)) in ours.iter().zip(&theirs) {
            if a != b {
                return Err(ModelError::ConfigMismatch(format!("{key}: checkpoint has {a}, config has {b}")));
            }
        }
        Ok(())
    }
}

pub(crate) fn to_bytes(model: &Model, only: Option<super::Part>) -> Vec<u8> {
    let params: Vec<&Param> = model.params.iter().filter(|p| only.is_none_or(|part| p.part == part)).collect();
    let mut header = format!("format_version={FORMAT_VERSION}\n");
    for (key, value) in model.config.to_pairs() {
        header.push_str(&format!("config.{key}={value}\n"));
    }
    let prov = &model.provenance;
    header.push_str(&format!("provenance.seed={}\n", prov.seed));
    header.push_str(&format!("provenance.regime={}\n", prov.regime));
    header.push_str(&format!("provenance.epochs={}\n", prov.epochs));
    header.push_str(&format!("provenance.lr={}\n", prov.lr));
    header.push_str(&format!("provenance.batch_size={}\n", prov.batch_size));
    header.push_str(&format!("params={}\n", params.len()));

    let payload: usize = params.iter().map(|p| 12 + p.name.len() + 4 * (p.tensor.shape().len() + p.tensor.len())).sum();
    let mut out = Vec::with_capacity(12 + header.len() + payload);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u32).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.extend_from_slice(&(p.tensor.shape().len() as u32).to_le_bytes());
        for &d in p.tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelError::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 || !bytes.starts_with(b"LUCENET") {
        return Err(ModelError::BadMagic);
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(ModelError::VersionMismatch { found: String::from_utf8_lossy(&bytes[7..8]).into_owned() });
    }
    let mut r = Reader { bytes, pos: 8 };
    let header_len = r.u32("header length")? as usize;
    let header = std::str::from_utf8(r.take(header_len, "header")?)
        .map_err(|_| ModelError::Header("header is not UTF-8".into()))?;

    let mut config = DenseNetConfig::default();
    let mut provenance = Provenance::default();
    let mut count = None;
    let mut version = None;
    for line in header.lines() {
        let (key, value) = line.split_once('=').ok_or_else(|| ModelError::Header(format!("line {line:?}")))?;
        let num = |v: &str| v.parse::<u64>().map_err(|_| ModelError::Header(format!("{key}={v}")));
        match key {
            "format_version" => version = Some(value.to_string()),
            "provenance.seed" => provenance.seed = num(value)?,
            "provenance.regime" => provenance.regime = value.to_string(),
            "provenance.epochs" => provenance.epochs = num(value)? as usize,
            "provenance.lr" => {
                provenance.lr = value.parse().map_err(|_| ModelError::Header(format!("{key}={value}")))?
            }
            "provenance.batch_size" => provenance.batch_size = num(value)? as usize,
            "params" => count = Some(num(value)? as usize),
            _ => match key.strip_prefix("config.") {
                Some(k) => match config.set(k, value) {
                    Ok(true) => {}
                    Ok(false) => return Err(ModelError::Header(format!("unknown key {key}"))),
                    Err(e) => return Err(ModelError::Header(format!("{key}: {e}"))),
                },
                None => return Err(ModelError::Header(format!("unknown key {key}"))),
            },
        }
    }
    match version.as_deref() {
        Some(v) if v == FORMAT_VERSION.to_string() => {}
        Some(v) => return Err(ModelError::VersionMismatch { found: v.to_string() }),
        None => return Err(ModelError::Header("missing format_version".into())),
    }
    let count = count.ok_or_else(|| ModelError::Header("missing params count".into()))?;

    let mut params = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(name_len, "parameter name")?)
            .map_err(|_| ModelError::Header(format!("parameter {i} name is not UTF-8")))?
            .to_string();
        let ndim = r.u32("dim count")? as usize;
        let dims = (0..ndim).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let raw = r.take(4 * n, &format!("payload of {name}"))?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let tensor = Tensor::new(&dims, data).map_err(|_| ModelError::Header(format!("{name} has dims {dims:?}")))?;
        params.push((name, tensor));
    }
    if r.pos != bytes.len() {
        return Err(ModelError::Header(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Checkpoint { config, provenance, params })
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
    from_bytes(&bytes)
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<()> {
    write(path, &to_bytes(model, None))
}

/// Writes only the backbone parameters (used after pretext pretraining).
pub fn save_backbone(model: &Model, path: &Path) -> Result<()> {
    write(path, &to_bytes(model, Some(super::Part::Backbone)))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })
}

/// Loads a complete model; every parameter must be present.
pub fn load_checkpoint(path: &Path) -> Result<Model> {
    model_from_checkpoint(read_checkpoint(path)?)
}

pub(crate) fn model_from_checkpoint(ckpt: Checkpoint) -> Result<Model> {
    ckpt.config.validate()?;
    let layout = param_layout(&ckpt.config);
    let mut by_name: std::collections::HashMap<String, Tensor> = ckpt.params.into_iter().collect();
    let mut params = Vec::with_capacity(layout.len());
    for (name, part, _) in layout {
        let tensor = by_name.remove(&name).ok_or_else(|| ModelError::MissingParameter(name.clone()))?;
        params.push(Param { name, part, tensor });
    }
    if let Some(name) = by_name.into_keys().min() {
        return Err(ModelError::UnknownParameter(name));
    }
    Model::assemble(ckpt.config, params, ckpt.provenance)
}

impl Model {
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        to_bytes(self, None)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Model> {
        model_from_checkpoint(from_bytes(bytes)?)
    }

    pub fn save_backbone(&self, path: &Path) -> Result<()> {
        save_backbone(self, path)
    }
}
