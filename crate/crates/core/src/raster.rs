//! Portable float raster ("FRAS") encoding.
//!
//! Layout, little-endian:
//!
//! | bytes | field    | value                          |
//! |-------|----------|--------------------------------|
//! | 4     | magic    | `FRAS`                         |
//! | 1     | version  | `1`                            |
//! | 1     | dtype    | `0` = f32, `1` = f64           |
//! | 4     | height   | u32, > 0                       |
//! | 4     | width    | u32, > 0                       |
//! | 4     | channels | u32, > 0                       |
//!
//! followed by `height * width * channels` samples in row-major order with
//! the channel index varying fastest.

use crate::error::{Error, Result};
use crate::image::ImageBuffer;

pub const MAGIC: &[u8; 4] = b"FRAS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleType {
    F32,
    F64,
}

impl SampleType {
    fn code(self) -> u8 {
        match self {
            SampleType::F32 => 0,
            SampleType::F64 => 1,
        }
    }

    fn size(self) -> usize {
        match self {
            SampleType::F32 => 4,
            SampleType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub dtype: SampleType,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("FRAS header field `{field}`: {msg}"))
}

pub fn parse_header(bytes: &[u8]) -> Result<Header> {
    let take = |at: usize, len: usize, field: &str| {
        bytes
            .get(at..at + len)
            .ok_or_else(|| field_err(field, format!("truncated ({} bytes total)", bytes.len())))
    };
    let magic = take(0, 4, "magic")?;
    if magic != MAGIC {
        return Err(field_err("magic", format!("expected \"FRAS\", found {magic:?}")));
    }
    let version = take(4, 1, "version")?[0];
    if version != VERSION {
        return Err(field_err("version", format!("unsupported version {version}")));
    }
    let dtype = match take(5, 1, "dtype")?[0] {
        0 => SampleType::F32,
        1 => SampleType::F64,
        c => return Err(field_err("dtype", format!("unknown code {c}"))),
    };
    let dim = |at: usize, field: &str| -> Result<usize> {
        let b = take(at, 4, field)?;
        let v = u32::from_le_bytes([b[0], b[1], b[2], b[3]]);
        if v == 0 {
            return Err(field_err(field, "must be positive"));
        }
        Ok(v as usize)
    };
    Ok(Header {
        dtype,
        height: dim(6, "height")?,
        width: dim(10, "width")?,
        channels: dim(14, "channels")?,
    })
}

pub fn decode(bytes: &[u8]) -> Result<ImageBuffer> {
    let h = parse_header(bytes)?;
    let n = h
        .height
        .checked_mul(h.width)
        .and_then(|p| p.checked_mul(h.channels))
        .ok_or_else(|| field_err("channels", "sample count overflows"))?;
    let payload = &bytes[HEADER_LEN..];
    let expected = n.checked_mul(h.dtype.size());
    if expected != Some(payload.len()) {
        return Err(Error::Input(format!(
            "FRAS payload holds {} bytes, header declares {}x{}x{} {:?} samples",
            payload.len(),
            h.height,
            h.width,
            h.channels,
            h.dtype
        )));
    }
    let samples: Vec<f64> = match h.dtype {
        SampleType::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        SampleType::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    let (px, ch) = (h.height * h.width, h.channels);
    let mut planar = vec![0.0; n];
    for (i, chunk) in samples.chunks_exact(ch).enumerate() {
        for (c, &v) in chunk.iter().enumerate() {
            planar[c * px + i] = v;
        }
    }
    ImageBuffer::with_channels(h.height, h.width, ch, planar)
}

pub fn encode(img: &ImageBuffer, dtype: SampleType) -> Vec<u8> {
    let (hgt, wid, ch) = (img.height(), img.width(), img.channels());
    let px = hgt * wid;
    let mut out = Vec::with_capacity(HEADER_LEN + px * ch * dtype.size());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype.code());
    for d in [hgt, wid, ch] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    let data = img.data();
    for i in 0..px {
        for c in 0..ch {
            let v = data[c * px + i];
            match dtype {
                SampleType::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
                SampleType::F64 => out.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    out
}
