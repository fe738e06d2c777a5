//! Checkpoint container (little-endian):
//!
//! ```text
//! "CKP1"  u32 version  u32 array_count
//! per array: u16 name_len, name (UTF-8), u8 ndim, u32 dims[ndim], f64 payload[prod(dims)]
//! u32 config_len, config_len bytes of "key=value\n" lines
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{OptimizerKind, TrainConfig};
use crate::autograd::Tensor;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, ModelParams, NamedTensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKP1";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub train: TrainConfig,
}

pub fn encode_checkpoint(model: &Model, train: &TrainConfig) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.params.arrays.len() as u32).to_le_bytes());
    for a in &model.params.arrays {
        out.extend_from_slice(&(a.name.len() as u16).to_le_bytes());
        out.extend_from_slice(a.name.as_bytes());
        out.push(a.tensor.shape().len() as u8);
        for &d in a.tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in a.tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let c = &model.config;
    let config = format!(
        "window={}\nj={}\nd_feat={}\nd_hidden={}\ncond_bits={}\nepochs={}\nbatch={}\nlr={:?}\nseed={}\noptimizer={}\nshuffle={}\n",
        c.window,
        c.j,
        c.d_feat,
        c.d_hidden,
        c.cond_bits,
        train.epochs,
        train.batch,
        train.lr,
        train.seed,
        train.optimizer,
        train.shuffle
    );
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::TruncatedPayload {
            needed: (self.pos + n) as u64,
            available: self.bytes.len() as u64,
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic { expected: "CKP1", found: bytes[..bytes.len().min(4)].to_vec() });
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Parse { line: 0, msg: "array name is not UTF-8".into() })?;
        let ndim = r.u8()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let payload = r.take(n.checked_mul(8).ok_or(Error::TruncatedPayload { needed: u64::MAX, available: bytes.len() as u64 })?)?;
        let data = payload.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        arrays.push(NamedTensor { name, tensor: Tensor::new(shape, data)? });
    }
    let config_len = r.u32()? as usize;
    let text = std::str::from_utf8(r.take(config_len)?)
        .map_err(|_| Error::Parse { line: 0, msg: "config block is not UTF-8".into() })?;
    if r.pos != bytes.len() {
        return Err(Error::TrailingBytes((bytes.len() - r.pos) as u64));
    }

    let mut kv = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(Error::Parse { line: i + 1, msg: format!("expected key=value, got {line:?}") })?;
        kv.insert(k.trim(), (v.trim(), i + 1));
    }
    fn field<T: std::str::FromStr>(kv: &BTreeMap<&str, (&str, usize)>, key: &str) -> Result<T> {
        let (v, line) = kv.get(key).ok_or(Error::Parse { line: 0, msg: format!("missing config key {key}") })?;
        v.parse().map_err(|_| Error::Parse { line: *line, msg: format!("bad value {v:?} for {key}") })
    }
    let config = ModelConfig {
        window: field(&kv, "window")?,
        j: field(&kv, "j")?,
        d_feat: field(&kv, "d_feat")?,
        d_hidden: field(&kv, "d_hidden")?,
        cond_bits: field(&kv, "cond_bits")?,
    };
    let optimizer: String = field(&kv, "optimizer")?;
    let train = TrainConfig {
        epochs: field(&kv, "epochs")?,
        batch: field(&kv, "batch")?,
        lr: field(&kv, "lr")?,
        seed: field(&kv, "seed")?,
        optimizer: optimizer.parse::<OptimizerKind>()?,
        shuffle: field(&kv, "shuffle")?,
    };
    let model = Model::new(config, ModelParams { arrays })?;
    Ok(Checkpoint { model, train })
}

pub fn save_checkpoint(model: &Model, train: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(model, train))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    decode_checkpoint(&fs::read(path)?)
}
