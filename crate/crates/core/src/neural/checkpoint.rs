//! Versioned binary checkpoints for network parameters and optimizer state.
//!
//! Layout (all integers little-endian):
//!   magic "MMRL" | format version u32 | config hash u64 | train step u64 |
//!   parameter tensor table | optimizer flag u8 |
//!   [adam step u64 | first-moment table | second-moment table]
//!
//! A tensor table is: count u32, then per tensor name_len u16, name bytes,
//! value count u64, f64 values. Loading verifies the magic, version, every
//! tensor name and shape, and that the file ends exactly at the last byte.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::{NetworkParams, OptimizerState};

pub const MAGIC: [u8; 4] = *b"MMRL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic bytes, not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint format version {0}")]
    BadVersion(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("tensor {name}: expected {expected} values, found {found}")]
    ShapeMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config_hash: u64,
    pub train_step: u64,
    pub params: NetworkParams,
    pub optimizer: Option<OptimizerState>,
}

/// FNV-1a over the serialized run configuration; stored in the header so a
/// resumed run can detect a mismatched setup.
pub fn config_hash(config_text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in config_text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn write_tensor_table(out: &mut Vec<u8>, params: &NetworkParams) {
    let tensors = params.tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, values) in tensors {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.pos + n > self.buf.len() {
            return Err(CheckpointError::Corrupt("unexpected end of file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, CheckpointError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn read_tensor_table(r: &mut Reader) -> Result<NetworkParams, CheckpointError> {
    let mut params = NetworkParams::zeros();
    let count = r.u32()? as usize;
    let expected_names: Vec<&'static str> =
        params.tensors().iter().map(|(n, _)| *n).collect();
    if count != expected_names.len() {
        return Err(CheckpointError::Corrupt(format!(
            "expected {} tensors, found {count}",
            expected_names.len()
        )));
    }
    for (k, expected_name) in expected_names.iter().enumerate() {
        let name_len = r.u16()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| CheckpointError::Corrupt("tensor name not utf-8".into()))?;
        if name != *expected_name {
            return Err(CheckpointError::Corrupt(format!(
                "tensor {k} named {name:?}, expected {expected_name:?}"
            )));
        }
        let len = r.u64()? as usize;
        let mut tensors = params.tensors_mut();
        let target = &mut tensors[k].1;
        if len != target.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                expected: target.len(),
                found: len,
            });
        }
        for slot in target.iter_mut() {
            *slot = r.f64()?;
        }
    }
    Ok(params)
}

/// Serialize and write atomically: a temp file in the same directory is
/// renamed over the destination so readers never see a partial checkpoint.
pub fn save(
    path: &Path,
    params: &NetworkParams,
    optimizer: Option<&OptimizerState>,
    train_step: u64,
    config_hash: u64,
) -> Result<(), CheckpointError> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&config_hash.to_le_bytes());
    out.extend_from_slice(&train_step.to_le_bytes());
    write_tensor_table(&mut out, params);
    match optimizer {
        Some(opt) => {
            out.push(1);
            out.extend_from_slice(&opt.step.to_le_bytes());
            write_tensor_table(&mut out, &opt.first_moment);
            write_tensor_table(&mut out, &opt.second_moment);
        }
        None => out.push(0),
    }

    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&out)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf: &buf, pos: 0 };

    if r.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(CheckpointError::BadVersion(version));
    }
    let config_hash = r.u64()?;
    let train_step = r.u64()?;
    let params = read_tensor_table(&mut r)?;

    let flag = r.take(1)?[0];
    let optimizer = match flag {
        0 => None,
        1 => {
            let step = r.u64()?;
            let first_moment = read_tensor_table(&mut r)?;
            let second_moment = read_tensor_table(&mut r)?;
            Some(OptimizerState {
                first_moment,
                second_moment,
                step,
            })
        }
        f => {
            return Err(CheckpointError::Corrupt(format!(
                "bad optimizer flag {f}"
            )))
        }
    };

    if r.pos != buf.len() {
        return Err(CheckpointError::Corrupt(format!(
            "{} trailing bytes",
            buf.len() - r.pos
        )));
    }

    Ok(Checkpoint {
        config_hash,
        train_step,
        params,
        optimizer,
    })
}
