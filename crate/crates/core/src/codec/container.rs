//! Byte layout shared by coded references and coded auxiliary data.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NVSG"
//! 4       1     version (1)
//! 5       1     kind (0 = reference, 1 = auxiliary)
//! 6       2     q, little endian
//! 8       2     width
//! 10      2     height
//! 12      1     padded flag (dimensions not multiples of 8)
//! 13      4     view index of the reference (u32::MAX if none)
//! 17      ...   payload
//! ```
//!
//! Reference streams continue with the coded image. Auxiliary streams
//! continue with the f32 voxel pitch, a u8 layer count and, per layer, the
//! u32 atlas view and its coded image; then a u32 overflow count and 20-byte
//! records (u32 id, 3 x f32 position, 3 x u8 color, u8 facing coded as
//! 2 * axis + positive); then, per layer, a u32 count and the voxel ids of
//! its valid pixels in raster order.

use super::image::take;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"NVSG";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Reference = 0,
    Aux = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub kind: StreamKind,
    pub q: u32,
    pub width: usize,
    pub height: usize,
    pub padded: bool,
    pub view_index: Option<usize>,
}

impl Header {
    pub fn write(&self, out: &mut Vec<u8>) -> Result<()> {
        let narrow = |v: usize, what: &str| {
            u16::try_from(v).map_err(|_| Error::Bitstream(format!("{what} {v} does not fit the header")))
        };
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.kind as u8);
        out.extend_from_slice(&narrow(self.q as usize, "q")?.to_le_bytes());
        out.extend_from_slice(&narrow(self.width, "width")?.to_le_bytes());
        out.extend_from_slice(&narrow(self.height, "height")?.to_le_bytes());
        out.push(self.padded as u8);
        let index = self.view_index.map_or(u32::MAX, |v| v as u32);
        out.extend_from_slice(&index.to_le_bytes());
        Ok(())
    }

    pub fn read(bytes: &mut &[u8]) -> Result<Self> {
        if take(bytes, 4)? != MAGIC {
            return Err(Error::Bitstream("bad magic".into()));
        }
        let version = take(bytes, 1)?[0];
        if version != VERSION {
            return Err(Error::Bitstream(format!("unsupported version {version}")));
        }
        let kind = match take(bytes, 1)?[0] {
            0 => StreamKind::Reference,
            1 => StreamKind::Aux,
            k => return Err(Error::Bitstream(format!("unknown stream kind {k}"))),
        };
        let q = read_u16(bytes)? as u32;
        let width = read_u16(bytes)? as usize;
        let height = read_u16(bytes)? as usize;
        let padded = take(bytes, 1)?[0] != 0;
        let index = read_u32(bytes)?;
        let view_index = (index != u32::MAX).then_some(index as usize);
        Ok(Self { kind, q, width, height, padded, view_index })
    }
}

pub(crate) fn read_u16(bytes: &mut &[u8]) -> Result<u16> {
    Ok(u16::from_le_bytes(take(bytes, 2)?.try_into().unwrap()))
}

pub(crate) fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    Ok(u32::from_le_bytes(take(bytes, 4)?.try_into().unwrap()))
}

pub(crate) fn read_f32(bytes: &mut &[u8]) -> Result<f32> {
    Ok(f32::from_le_bytes(take(bytes, 4)?.try_into().unwrap()))
}
