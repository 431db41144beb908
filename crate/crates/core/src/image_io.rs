//! PNG / PGM / PPM reading and writing. Samples are divided by the maximum
//! integer value on read and rounded to nearest on write.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::model::ImageFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

pub fn read_frame(path: &Path, frame_index: u64) -> Result<ImageFrame> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })?;
    let (w, h) = (img.width(), img.height());
    let (channels, data): (u32, Vec<f64>) = match img {
        DynamicImage::ImageLuma8(b) => (1, scale(b.into_raw(), u8::MAX as f64)),
        DynamicImage::ImageLuma16(b) => (1, scale(b.into_raw(), u16::MAX as f64)),
        DynamicImage::ImageRgb8(b) => (3, scale(b.into_raw(), u8::MAX as f64)),
        DynamicImage::ImageRgb16(b) => (3, scale(b.into_raw(), u16::MAX as f64)),
        DynamicImage::ImageLumaA8(_) => (1, scale(img.to_luma8().into_raw(), u8::MAX as f64)),
        DynamicImage::ImageLumaA16(_) => {
            (1, scale(img.to_luma16().into_raw(), u16::MAX as f64))
        }
        DynamicImage::ImageRgba16(_) => (3, scale(img.to_rgb16().into_raw(), u16::MAX as f64)),
        other => (3, scale(other.to_rgb8().into_raw(), u8::MAX as f64)),
    };
    Ok(ImageFrame::new(w, h, channels, data, frame_index)?)
}

fn scale<T: Into<f64> + Copy>(raw: Vec<T>, max: f64) -> Vec<f64> {
    raw.into_iter().map(|v| v.into() / max).collect()
}

fn quantize<T: TryFrom<u32>>(v: f64, max: u32) -> T
where
    <T as TryFrom<u32>>::Error: std::fmt::Debug,
{
    let q = (v.clamp(0.0, 1.0) * max as f64).round() as u32;
    T::try_from(q.min(max)).expect("quantized sample fits")
}

/// Writes `frame`; the format follows the file extension (`png`, `pgm`, `ppm`).
pub fn write_frame(path: &Path, frame: &ImageFrame, depth: BitDepth) -> Result<()> {
    let (w, h) = (frame.width(), frame.height());
    let img: DynamicImage = match (frame.channels(), depth) {
        (1, BitDepth::Eight) => DynamicImage::ImageLuma8(
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, quantize_all(frame.data(), 255))
                .expect("buffer size"),
        ),
        (1, BitDepth::Sixteen) => DynamicImage::ImageLuma16(
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, quantize_all(frame.data(), 65535))
                .expect("buffer size"),
        ),
        (_, BitDepth::Eight) => DynamicImage::ImageRgb8(
            ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, quantize_all(frame.data(), 255))
                .expect("buffer size"),
        ),
        (_, BitDepth::Sixteen) => DynamicImage::ImageRgb16(
            ImageBuffer::<Rgb<u16>, _>::from_raw(w, h, quantize_all(frame.data(), 65535))
                .expect("buffer size"),
        ),
    };
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Image {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn quantize_all<T: TryFrom<u32>>(data: &[f64], max: u32) -> Vec<T>
where
    <T as TryFrom<u32>>::Error: std::fmt::Debug,
{
    data.iter().map(|&v| quantize(v, max)).collect()
}

/// True for extensions this module can read.
pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref(),
        Some("png" | "pgm" | "ppm" | "pnm")
    )
}

/// Image files in `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let p = entry.path();
        if p.is_file() && is_image_path(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}
