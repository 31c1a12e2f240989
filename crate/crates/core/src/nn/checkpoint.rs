//! Parameter checkpoints.
//!
//! ```text
//! magic     8 bytes "SFBCKPT\0"
//! version   u32 (1)
//! n_blocks  u32
//! per block: name_len u32, name (utf-8), rows u64, cols u64, rows*cols f64
//! ```
//! All integers and floats little-endian.

use std::io::{Read, Write};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SFBCKPT\0";
pub const VERSION: u32 = 1;

pub fn write_checkpoint(w: &mut impl Write, blocks: &[(String, Matrix)]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(blocks.len() as u32).to_le_bytes())?;
    for (name, m) in blocks {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.rows() as u64).to_le_bytes())?;
        w.write_all(&(m.cols() as u64).to_le_bytes())?;
        for x in m.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated checkpoint".into()))?;
    Ok(buf)
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Vec<(String, Matrix)>> {
    if &read_array::<8>(r)? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = u32::from_le_bytes(read_array(r)?);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = u32::from_le_bytes(read_array(r)?) as usize;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let len = u32::from_le_bytes(read_array(r)?) as usize;
        if len > 1 << 16 {
            return Err(Error::Format("checkpoint block name too long".into()));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(|_| Error::Format("truncated checkpoint".into()))?;
        let name = String::from_utf8(name).map_err(|_| Error::Format("block name is not utf-8".into()))?;
        let rows = u64::from_le_bytes(read_array(r)?) as usize;
        let cols = u64::from_le_bytes(read_array(r)?) as usize;
        let count = rows.checked_mul(cols).filter(|&c| c <= 1 << 28).ok_or_else(|| Error::Format("block too large".into()))?;
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(f64::from_le_bytes(read_array(r)?));
        }
        out.push((name, Matrix::from_vec(rows, cols, data)?));
    }
    Ok(out)
}
