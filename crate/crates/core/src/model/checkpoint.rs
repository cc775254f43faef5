//! Checkpoints: `LTSPCKPT`, a u32 format version, a length-prefixed
//! `key = value` config block, then named f32 records. Integers are
//! little-endian u32.

use std::fs;
use std::path::Path;

use ltsp_tensor::{Real, Tensor};

use super::config::{Ablation, LtspNetConfig};
use super::net::LtspNet;
use crate::error::{CoreError, FormatError, Result};
use crate::kv::{KvReader, KvWriter};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LTSPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

const RUNNING_MEAN: &str = ".running_mean";
const RUNNING_VAR: &str = ".running_var";

pub fn encode_checkpoint<T: Real>(net: &LtspNet<T>) -> Vec<u8> {
    let mut kv = KvWriter::new();
    net.config().write_kv(&mut kv);
    kv.put("ablation", net.ablation());
    let config = kv.finish();

    let mut records: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    let to_f32 = |v: &[T]| v.iter().map(|x| x.to_f32().unwrap_or(f32::NAN)).collect::<Vec<_>>();
    for p in net.params() {
        records.push((p.name.clone(), p.tensor.dims().to_vec(), to_f32(p.tensor.data())));
    }
    for (name, n) in net.norms() {
        records.push((format!("{name}{RUNNING_MEAN}"), vec![n.channels()], to_f32(&n.running_mean)));
        records.push((format!("{name}{RUNNING_VAR}"), vec![n.channels()], to_f32(&n.running_var)));
    }

    let mut out = CHECKPOINT_MAGIC.to_vec();
    let put = |out: &mut Vec<u8>, x: usize| out.extend_from_slice(&(x as u32).to_le_bytes());
    put(&mut out, CHECKPOINT_VERSION as usize);
    put(&mut out, config.len());
    out.extend_from_slice(config.as_bytes());
    put(&mut out, records.len());
    for (name, dims, data) in records {
        put(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put(&mut out, dims.len());
        dims.iter().for_each(|&d| put(&mut out, d));
        data.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    }
    out
}

pub fn save_checkpoint<T: Real>(net: &LtspNet<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(net)).map_err(|e| CoreError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<LtspNet<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| match e {
        CoreError::Format { source, .. } => CoreError::format(path, source),
        other => other,
    })
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            bad(FormatError::PayloadMismatch { expected: self.at.saturating_add(n), found: self.bytes.len() })
        })?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn text(&mut self, n: usize) -> Result<&'a str> {
        std::str::from_utf8(self.take(n)?).map_err(|_| bad(FormatError::Header("text is not UTF-8".into())))
    }
}

fn bad(source: FormatError) -> CoreError {
    CoreError::format("<checkpoint>", source)
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<LtspNet<f32>> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(8).ok() != Some(CHECKPOINT_MAGIC.as_slice()) {
        return Err(bad(FormatError::BadMagic { expected: "LTSPCKPT" }));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(bad(FormatError::Version(version as u32)));
    }
    let len = cur.u32()?;
    let mut kv = KvReader::parse(cur.text(len)?)?;
    let config = LtspNetConfig::read_kv(&mut kv)?;
    let ablation: Ablation = kv.require::<String>("ablation")?.parse()?;
    kv.finish()?;
    let mut net = LtspNet::<f32>::new(config, ablation, 0)?;

    let count = cur.u32()?;
    let expected = net.params().len() + 2 * net.norms().len();
    if count != expected {
        return Err(bad(FormatError::Header(format!("{count} records, network has {expected}"))));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..count {
        let n = cur.u32()?;
        let name = cur.text(n)?.to_string();
        let rank = cur.u32()?;
        let dims = (0..rank).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
        let numel: usize = dims.iter().product();
        let raw = cur.take(numel * 4)?;
        let data: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        if !seen.insert(name.clone()) {
            return Err(bad(FormatError::Header(format!("duplicate record {name:?}"))));
        }
        install(&mut net, &name, &dims, data)?;
    }
    if cur.at != bytes.len() {
        return Err(bad(FormatError::PayloadMismatch { expected: cur.at, found: bytes.len() }));
    }
    Ok(net)
}

fn install(net: &mut LtspNet<f32>, name: &str, dims: &[usize], data: Vec<f32>) -> Result<()> {
    let mismatch = |want: &[usize]| bad(FormatError::Header(format!("record {name:?} has shape {dims:?}, expected {want:?}")));
    if let Some(p) = net.param_mut(name) {
        if p.tensor.dims() != dims {
            return Err(mismatch(p.tensor.dims()));
        }
        p.tensor = Tensor::from_vec(dims, data)?.with_grad();
        return Ok(());
    }
    for (suffix, is_mean) in [(RUNNING_MEAN, true), (RUNNING_VAR, false)] {
        if let Some(base) = name.strip_suffix(suffix) {
            if let Some((_, n)) = net.norms_mut().iter_mut().find(|(k, _)| k == base) {
                if dims != [n.channels()] {
                    return Err(mismatch(&[n.channels()]));
                }
                if is_mean {
                    n.running_mean = data;
                } else {
                    n.running_var = data;
                }
                return Ok(());
            }
        }
    }
    Err(bad(FormatError::Header(format!("unknown record {name:?}"))))
}
