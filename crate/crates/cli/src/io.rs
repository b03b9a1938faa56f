//! File formats: FRAS float rasters, 8/16-bit PNG and TIFF, JSON.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer as PixelBuffer, Luma, Rgb};
use regloss_core::metrics::InstanceMask;
use regloss_core::raster::{self, SampleType};
use regloss_core::{BinaryMask, ImageBuffer};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Sample encoding of a loaded raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Depth {
    U8,
    U16,
    Float,
}

impl Depth {
    /// Full-scale value of the encoding.
    pub fn full_scale(self) -> f64 {
        match self {
            Depth::U8 => 255.0,
            Depth::U16 => 65535.0,
            Depth::Float => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Fras,
    Png,
    Tiff,
}

fn format_of(path: &Path) -> CliResult<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "fras" => Ok(Format::Fras),
        "png" => Ok(Format::Png),
        "tif" | "tiff" => Ok(Format::Tiff),
        _ => Err(CliError::io(format!(
            "unsupported raster extension {ext:?} (expected .fras, .png, .tif or .tiff)"
        ))
        .at(path)),
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::from(e).at(path))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::from(e).at(path))
}

fn planes_from<T: Copy + Into<f64>>(raw: &[T], h: usize, w: usize, ch: usize) -> CliResult<ImageBuffer> {
    let px = h * w;
    let mut data = vec![0.0; px * ch];
    for (i, pixel) in raw.chunks_exact(ch).enumerate() {
        for (c, &v) in pixel.iter().enumerate() {
            data[c * px + i] = v.into();
        }
    }
    Ok(ImageBuffer::with_channels(h, w, ch, data)?)
}

fn from_dynamic(img: DynamicImage) -> CliResult<(ImageBuffer, Depth)> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => Ok((planes_from(b.as_raw(), h, w, 1)?, Depth::U8)),
        DynamicImage::ImageLumaA8(_) => {
            Ok((planes_from(img.to_luma8().as_raw(), h, w, 1)?, Depth::U8))
        }
        DynamicImage::ImageRgb8(b) => Ok((planes_from(b.as_raw(), h, w, 3)?, Depth::U8)),
        DynamicImage::ImageRgba8(_) => Ok((planes_from(img.to_rgb8().as_raw(), h, w, 3)?, Depth::U8)),
        DynamicImage::ImageLuma16(b) => Ok((planes_from(b.as_raw(), h, w, 1)?, Depth::U16)),
        DynamicImage::ImageLumaA16(_) => {
            Ok((planes_from(img.to_luma16().as_raw(), h, w, 1)?, Depth::U16))
        }
        DynamicImage::ImageRgb16(b) => Ok((planes_from(b.as_raw(), h, w, 3)?, Depth::U16)),
        DynamicImage::ImageRgba16(_) => {
            Ok((planes_from(img.to_rgb16().as_raw(), h, w, 3)?, Depth::U16))
        }
        other => Ok((planes_from(other.to_rgb32f().as_raw(), h, w, 3)?, Depth::Float)),
    }
}

/// Loads a raster with its raw sample values (0..255 for 8-bit files).
pub fn read_raster(path: &Path) -> CliResult<(ImageBuffer, Depth)> {
    let format = format_of(path)?;
    let bytes = read_bytes(path)?;
    match format {
        Format::Fras => Ok((raster::decode(&bytes).map_err(|e| CliError::from(e).at(path))?, Depth::Float)),
        Format::Png | Format::Tiff => {
            let fmt = if format == Format::Png {
                image::ImageFormat::Png
            } else {
                image::ImageFormat::Tiff
            };
            let img = image::load_from_memory_with_format(&bytes, fmt)
                .map_err(|e| CliError::io(e.to_string()).at(path))?;
            from_dynamic(img).map_err(|e| e.at(path))
        }
    }
}

/// Loads a raster and reduces it to one channel.
pub fn read_gray(path: &Path) -> CliResult<(ImageBuffer, Depth)> {
    let (img, depth) = read_raster(path)?;
    if !matches!(img.channels(), 1 | 3) {
        return Err(CliError::io(format!(
            "expected a 1- or 3-channel raster, found {} channels",
            img.channels()
        ))
        .at(path));
    }
    Ok((img.to_gray(), depth))
}

/// Nonzero pixels of the first channel are inside the mask.
pub fn read_mask(path: &Path) -> CliResult<BinaryMask> {
    let (img, _) = read_raster(path)?;
    let (h, w) = img.shape();
    let data = img.plane(0).iter().map(|&v| v != 0.0).collect();
    Ok(BinaryMask::new(h, w, data)?)
}

/// Instance labels: 8/16-bit grayscale PNG/TIFF or a single-channel FRAS
/// holding nonnegative integers. 0 is background.
pub fn read_labels(path: &Path) -> CliResult<InstanceMask> {
    let (img, _) = read_raster(path)?;
    if img.channels() != 1 {
        return Err(CliError::io(format!(
            "label image must have one channel, found {}",
            img.channels()
        ))
        .at(path));
    }
    let (h, w) = img.shape();
    let labels = img
        .data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(CliError::io(format!("label value {v} is not a nonnegative integer")).at(path))
            }
        })
        .collect::<CliResult<Vec<u32>>>()?;
    Ok(InstanceMask::new(h, w, labels)?)
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Writes `img` to `path`; PNG/TIFF outputs store `value * scale` rounded to
/// 8 bits, FRAS outputs store f64 samples unscaled.
pub fn write_raster(path: &Path, img: &ImageBuffer, scale: f64) -> CliResult<()> {
    let format = format_of(path)?;
    if format == Format::Fras {
        return write_bytes(path, &raster::encode(img, SampleType::F64));
    }
    let (h, w) = img.shape();
    let px = h * w;
    let d = img.data();
    let save = |r: image::ImageResult<()>| r.map_err(|e| CliError::io(e.to_string()).at(path));
    match img.channels() {
        1 => {
            let raw: Vec<u8> = d.iter().map(|&v| to_u8(v * scale)).collect();
            let buf: PixelBuffer<Luma<u8>, _> = PixelBuffer::from_raw(w as u32, h as u32, raw)
                .ok_or_else(|| CliError::io("raster size overflow").at(path))?;
            save(buf.save(path))
        }
        3 => {
            let raw: Vec<u8> = (0..px)
                .flat_map(|i| (0..3).map(move |c| to_u8(d[c * px + i] * scale)))
                .collect();
            let buf: PixelBuffer<Rgb<u8>, _> = PixelBuffer::from_raw(w as u32, h as u32, raw)
                .ok_or_else(|| CliError::io("raster size overflow").at(path))?;
            save(buf.save(path))
        }
        c => Err(CliError::io(format!("cannot store {c} channels in an 8-bit image")).at(path)),
    }
}

/// Pretty JSON with a trailing newline. Floats use the shortest
/// representation that parses back to the same value.
pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn read_json(path: &Path) -> CliResult<serde_json::Value> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::io(format!("invalid JSON: {e}")).at(path))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => write_bytes(p, text.as_bytes()),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}
