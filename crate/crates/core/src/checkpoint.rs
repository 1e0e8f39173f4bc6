//! Deterministic binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"HEMB"
//! version u32
//! config  u64   FNV-1a hash of the producing TrainConfig JSON
//! length  u64   byte length of everything after this field
//! domains u32, then per domain: dim u32, means f64*, stds f64*
//! blocks  u32, then per block: name (u32 len + utf8),
//!         ndims u32, dims u64*, values f64*
//! ```
//!
//! Values are raw IEEE-754 bits, so save -> load -> save reproduces the
//! file byte for byte. Loading verifies magic, version, the declared
//! payload length and (when the caller provides one) the config hash.

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::model::{Block, Model, ModelConfig, ParamSet};
use std::path::Path;

const MAGIC: &[u8; 4] = b"HEMB";
const VERSION: u32 = 1;

/// Checkpoint contents before they are matched against a model config.
#[derive(Debug, Clone)]
pub struct RawCheckpoint {
    pub config_hash: u64,
    pub stats: Vec<(Vec<f64>, Vec<f64>)>,
    pub blocks: Vec<Block>,
    pub data: Vec<f64>,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.buf.extend_from_slice(&v.to_bits().to_le_bytes());
        }
    }
    fn bytes(&mut self, bs: &[u8]) {
        self.u32(bs.len() as u32);
        self.buf.extend_from_slice(bs);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
            .collect())
    }
}

/// Serializes a model under the producing config's hash.
pub fn save(path: &Path, model: &Model, config_hash: u64) -> Result<()> {
    let mut payload = Writer { buf: Vec::new() };
    payload.u32(model.standardizer.per_domain.len() as u32);
    for (mean, std) in &model.standardizer.per_domain {
        payload.u32(mean.len() as u32);
        payload.f64s(mean);
        payload.f64s(std);
    }
    payload.u32(model.params.blocks().len() as u32);
    for b in model.params.blocks() {
        payload.bytes(b.name.as_bytes());
        payload.u32(b.shape.len() as u32);
        for &d in &b.shape {
            payload.u64(d as u64);
        }
        payload.f64s(&model.params.data()[b.offset..b.offset + b.len()]);
    }

    let mut head = Writer { buf: Vec::new() };
    head.buf.extend_from_slice(MAGIC);
    head.u32(VERSION);
    head.u64(config_hash);
    head.u64(payload.buf.len() as u64);
    head.buf.extend_from_slice(&payload.buf);

    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    std::fs::write(path, &head.buf)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a checkpoint file, verifying framing.
pub fn load(path: &Path) -> Result<RawCheckpoint> {
    if !path.exists() {
        return Err(Error::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let bytes = std::fs::read(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut r = Reader {
        buf: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {VERSION}"
        )));
    }
    let config_hash = r.u64()?;
    let declared = r.u64()? as usize;
    let actual = bytes.len() - r.pos;
    if declared != actual {
        return Err(Error::Checkpoint(format!(
            "payload length mismatch: header says {declared}, file holds {actual}"
        )));
    }

    let n_domains = r.u32()? as usize;
    let mut stats = Vec::with_capacity(n_domains);
    for _ in 0..n_domains {
        let dim = r.u32()? as usize;
        let mean = r.f64s(dim)?;
        let std = r.f64s(dim)?;
        stats.push((mean, std));
    }

    let n_blocks = r.u32()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks);
    let mut data = Vec::new();
    for _ in 0..n_blocks {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("block name is not utf-8".into()))?;
        let ndims = r.u32()? as usize;
        let mut shape = Vec::with_capacity(ndims);
        for _ in 0..ndims {
            shape.push(r.u64()? as usize);
        }
        let len: usize = shape.iter().product();
        let offset = data.len();
        data.extend(r.f64s(len)?);
        blocks.push(Block {
            name,
            shape,
            offset,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after blocks".into()));
    }
    Ok(RawCheckpoint {
        config_hash,
        stats,
        blocks,
        data,
    })
}

/// Rebuilds a model from a checkpoint, verifying the config hash and
/// that the stored blocks exactly match the geometry the config
/// implies.
pub fn restore_model(
    cfg: &ModelConfig,
    specs: Vec<crate::data::DomainSpec>,
    q: usize,
    raw: RawCheckpoint,
    current_hash: u64,
) -> Result<Model> {
    if raw.config_hash != current_hash {
        return Err(Error::ConfigHashMismatch {
            expected: raw.config_hash,
            got: current_hash,
        });
    }
    if raw.stats.len() != specs.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint standardizes {} sources, config declares {}",
            raw.stats.len(),
            specs.len()
        )));
    }
    let mut model = Model::new(cfg.clone(), specs, q, 0)?;
    let expected: Vec<(String, Vec<usize>)> = model
        .params
        .blocks()
        .iter()
        .map(|b| (b.name.clone(), b.shape.clone()))
        .collect();
    let got: Vec<(String, Vec<usize>)> = raw
        .blocks
        .iter()
        .map(|b| (b.name.clone(), b.shape.clone()))
        .collect();
    if expected != got {
        return Err(Error::Checkpoint(format!(
            "parameter layout mismatch: config implies {expected:?}, checkpoint holds {got:?}"
        )));
    }
    model.params = ParamSet::from_parts(raw.blocks, raw.data)?;
    model.standardizer = Standardizer {
        per_domain: raw.stats,
    };
    Ok(model)
}
