//! PNG label images, grayscale images and previews, plus atomic file writes.

use std::io::Write;
use std::path::Path;

use cellfield_core::{FieldMap, LabelImage, Raster};
use image::codecs::png::PngEncoder;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{AtPath, Error, Result};

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).at(path)?;
    tmp.write_all(bytes).at(path)?;
    tmp.persist(path).map_err(|e| e.error).at(path)?;
    Ok(())
}

fn encode_png(width: usize, height: usize, bytes: &[u8], color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(bytes, width as u32, height as u32, color)
        .expect("in-memory PNG encoding of a well-sized buffer");
    out
}

/// 16-bit grayscale PNG with one id per pixel. Fails if an id exceeds 65535.
pub fn encode_labels(labels: &LabelImage) -> std::result::Result<Vec<u8>, u32> {
    let max = labels.max_id();
    if max > u32::from(u16::MAX) {
        return Err(max);
    }
    // the encoder expects 16-bit samples in native byte order
    let bytes: Vec<u8> = labels
        .labels()
        .iter()
        .flat_map(|&id| (id as u16).to_ne_bytes())
        .collect();
    Ok(encode_png(
        labels.width(),
        labels.height(),
        &bytes,
        ExtendedColorType::L16,
    ))
}

/// Decodes a single-channel 8- or 16-bit PNG into a label image.
pub fn decode_labels(bytes: &[u8]) -> std::result::Result<LabelImage, String> {
    let img =
        image::load_from_memory_with_format(bytes, ImageFormat::Png).map_err(|e| e.to_string())?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let ids: Vec<u32> = match img {
        DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
        other => {
            return Err(format!(
                "expected one gray channel, found {:?}",
                other.color()
            ))
        }
    };
    LabelImage::new(w, h, ids).map_err(|e| e.to_string())
}

pub fn read_labels(path: &Path) -> Result<LabelImage> {
    let bytes = std::fs::read(path).at(path)?;
    decode_labels(&bytes).map_err(|reason| Error::LabelFormat {
        path: path.to_owned(),
        reason,
    })
}

pub fn write_labels(path: &Path, labels: &LabelImage) -> Result<()> {
    let bytes = encode_labels(labels).map_err(|max| Error::LabelFormat {
        path: path.to_owned(),
        reason: format!("id {max} does not fit in 16 bits"),
    })?;
    write_atomic(path, &bytes)
}

pub fn encode_gray(image: &Raster<u8>) -> Vec<u8> {
    encode_png(
        image.width(),
        image.height(),
        image.data(),
        ExtendedColorType::L8,
    )
}

pub fn write_gray(path: &Path, image: &Raster<u8>) -> Result<()> {
    write_atomic(path, &encode_gray(image))
}

/// `value × 255`, rounded and clamped to the byte range.
pub fn field_preview(field: &FieldMap) -> Raster<u8> {
    field.map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
}

/// Color for an instance id: black background, then a fixed
/// golden-angle walk around the hue circle.
pub fn label_color(id: u32) -> [u8; 3] {
    if id == 0 {
        return [0, 0, 0];
    }
    let hue = (f64::from(id) * 0.618_033_988_749_895).fract() * 6.0;
    let sector = hue.floor();
    let f = hue - sector;
    let (v, lo) = (1.0, 0.25);
    let (up, down) = (lo + (v - lo) * f, v - (v - lo) * f);
    let rgb = match sector as u8 {
        0 => [v, up, lo],
        1 => [down, v, lo],
        2 => [lo, v, up],
        3 => [lo, down, v],
        4 => [up, lo, v],
        _ => [v, lo, down],
    };
    rgb.map(|c| (c * 255.0).round() as u8)
}

pub fn encode_label_preview(labels: &LabelImage) -> Vec<u8> {
    let rgb: Vec<u8> = labels
        .labels()
        .iter()
        .flat_map(|&id| label_color(id))
        .collect();
    encode_png(
        labels.width(),
        labels.height(),
        &rgb,
        ExtendedColorType::Rgb8,
    )
}
