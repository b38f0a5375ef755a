//! Versioned binary checkpoint container.
//!
//! The byte layout is explicit so any language can read it:
//!
//! ```text
//! offset  size        field
//! 0       4           magic: ASCII "FGCP"
//! 4       4           u32 LE container version (currently 1)
//! 8       4           u32 LE manifest byte length M
//! 12      M           manifest, UTF-8 text (JSON)
//! 12+M    4           u32 LE entry count
//! then, per entry:
//!         2           u16 LE name byte length
//!         name        UTF-8 parameter name
//!         1           u8 scalar width: 4 = f32, 8 = f64
//!         1           u8 rank
//!         4 * rank    u32 LE dimensions, outermost first
//!         width*numel raw little-endian scalars, row-major
//! ```
//!
//! Scalars are converted on read when the stored width differs from the
//! requested element type (e.g. verifying an f32 checkpoint at f64).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Dtype, Scalar, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"FGCP";

#[derive(Debug, Clone)]
pub struct CheckpointEntry<T: Scalar> {
    pub name: String,
    pub tensor: Tensor<T>,
}

pub fn write_checkpoint<T: Scalar>(
    path: &Path,
    manifest: &str,
    entries: &[(String, &Tensor<T>)],
) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    buf.extend_from_slice(manifest.as_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, tensor) in entries {
        let name_bytes = name.as_bytes();
        if name_bytes.len() > u16::MAX as usize {
            return Err(Error::Checkpoint(format!("parameter name too long: {name}")));
        }
        buf.extend_from_slice(&(name_bytes.len() as u16).to_le_bytes());
        buf.extend_from_slice(name_bytes);
        buf.push(T::DTYPE.byte_width() as u8);
        buf.push(tensor.shape().len() as u8);
        for &d in tensor.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            v.write_le(&mut buf);
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
}

/// Read a checkpoint, returning the manifest text and all entries as `T`.
pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<(String, Vec<CheckpointEntry<T>>)> {
    let bytes = fs::read(path)?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported container version {version}"
        )));
    }
    let mlen = r.u32()? as usize;
    let manifest = String::from_utf8(r.take(mlen)?.to_vec())
        .map_err(|_| Error::Checkpoint("manifest is not UTF-8".into()))?;
    let count = r.u32()? as usize;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let nlen = r.u16()? as usize;
        let name = String::from_utf8(r.take(nlen)?.to_vec())
            .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let width = r.u8()? as usize;
        let dtype = match width {
            4 => Dtype::F32,
            8 => Dtype::F64,
            w => return Err(Error::Checkpoint(format!("unknown scalar width {w}"))),
        };
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * width)?;
        let data: Vec<T> = match dtype {
            Dtype::F32 => raw
                .chunks_exact(4)
                .map(|c| T::from_f64(f32::read_le(c) as f64))
                .collect(),
            Dtype::F64 => raw
                .chunks_exact(8)
                .map(|c| T::from_f64(f64::read_le(c)))
                .collect(),
        };
        entries.push(CheckpointEntry {
            name,
            tensor: Tensor::new(shape, data)?,
        });
    }
    Ok((manifest, entries))
}
