//! Binary checkpoint format, all integers little-endian:
//!
//! ```text
//! "FNET" | version u32 | config_len u32 | config JSON
//! | param_count u32
//! | per parameter, sorted by name:
//! |   name_len u32 | name | rank u32 | dims u32* | values f32*
//! | FNV-1a 64 of every preceding byte
//! ```

use std::path::Path;

use super::{ArchitectureConfig, FollowNet, ModelError};
use crate::autodiff::{ParameterSet, Tensor};

pub const MAGIC: &[u8; 4] = b"FNET";
pub const FORMAT_VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), ModelError> {
    let v = u32::try_from(v).map_err(|_| ModelError::Checkpoint(format!("{v} does not fit in 32 bits")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn encode_checkpoint(config: &ArchitectureConfig, params: &ParameterSet) -> Result<Vec<u8>, ModelError> {
    let mut out = Vec::with_capacity(16 + params.scalar_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(config).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    put_u32(&mut out, cfg.len())?;
    out.extend_from_slice(&cfg);
    put_u32(&mut out, params.len())?;
    for (name, t) in params.iter() {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, t.shape().len())?;
        for &d in t.shape() {
            put_u32(&mut out, d)?;
        }
        for &v in t.values() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let sum = fnv1a64(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| ModelError::Checkpoint(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
}

/// Parses and verifies a checkpoint. The parameter layout must match what
/// the stored architecture would initialise.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ArchitectureConfig, ParameterSet), ModelError> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let (payload, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    if fnv1a64(payload) != stored {
        return Err(ModelError::Checkpoint("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: payload, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION as usize {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let n = r.u32()?;
    let config: ArchitectureConfig =
        serde_json::from_slice(r.take(n)?).map_err(|e| ModelError::Checkpoint(format!("config block: {e}")))?;
    let expected = FollowNet::new(config.clone())?.init_params(0)?;
    let count = r.u32()?;
    let mut params = ParameterSet::new();
    for _ in 0..count {
        let n = r.u32()?;
        let name = std::str::from_utf8(r.take(n)?).map_err(|_| ModelError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = r.u32()?;
        let shape = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let len: usize = shape.iter().product();
        let raw = r.take(len.checked_mul(4).ok_or_else(|| ModelError::Checkpoint("shape overflow".into()))?)?;
        let values = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64).collect();
        params.insert(name, Tensor::new(shape, values)?)?;
    }
    if r.pos != payload.len() {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    if !params.same_layout(&expected) {
        return Err(ModelError::Checkpoint("parameter layout does not match the stored architecture".into()));
    }
    Ok((config, params))
}

pub fn save_checkpoint(path: &Path, config: &ArchitectureConfig, params: &ParameterSet) -> Result<(), ModelError> {
    let bytes = encode_checkpoint(config, params)?;
    std::fs::write(path, bytes).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<(ArchitectureConfig, ParameterSet), ModelError> {
    let bytes = std::fs::read(path).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
