//! Versioned binary container for parameters.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "CLOTCKPT"
//! version  u32
//! hlen     u64      byte length of the JSON header
//! header   hlen     {"segments":[{"name":..,"shape":[..]},..],"meta":{..}}
//! count    u64      number of f64 values
//! payload  count × f64 (IEEE 754, little-endian)
//! ```

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::param::{Layout, ParamVector};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CLOTCKPT";
pub const CONTAINER_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct SegmentEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    segments: Vec<SegmentEntry>,
    meta: serde_json::Value,
}

pub fn write_container<W: Write>(mut w: W, meta: &serde_json::Value, params: &ParamVector) -> Result<()> {
    let header = Header {
        segments: params
            .layout()
            .segments()
            .iter()
            .map(|s| SegmentEntry {
                name: s.name.clone(),
                shape: s.shape.clone(),
            })
            .collect(),
        meta: meta.clone(),
    };
    let header = serde_json::to_vec_pretty(&header)?;
    w.write_all(MAGIC)?;
    w.write_all(&CONTAINER_VERSION.to_le_bytes())?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    w.write_all(&(params.len() as u64).to_le_bytes())?;
    let mut payload = Vec::with_capacity(params.len() * 8);
    for v in params.values() {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated file".into()))?;
    Ok(u64::from_le_bytes(b))
}

/// Reads a container, returning its metadata and parameters.
pub fn read_container<R: Read>(mut r: R) -> Result<(serde_json::Value, ParamVector)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("truncated file".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb).map_err(|_| Error::Checkpoint("truncated file".into()))?;
    let version = u32::from_le_bytes(vb);
    if version != CONTAINER_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let hlen = read_u64(&mut r)? as usize;
    let mut hbytes = vec![0u8; hlen];
    r.read_exact(&mut hbytes).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    let header: Header = serde_json::from_slice(&hbytes).map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    let count = read_u64(&mut r)? as usize;
    let mut layout = Layout::new();
    for s in &header.segments {
        if layout.find(&s.name).is_some() {
            return Err(Error::Checkpoint(format!("duplicate segment `{}`", s.name)));
        }
        layout.push(s.name.clone(), &s.shape);
    }
    if layout.len() != count {
        return Err(Error::Checkpoint(format!("segments cover {} values but payload has {count}", layout.len())));
    }
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|_| Error::Checkpoint("truncated payload".into()))?;
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((header.meta, ParamVector::from_values(layout, values)?))
}
