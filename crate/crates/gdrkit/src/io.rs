//! PNG/JPEG raster files. Channels are read as `v / 255` and written as
//! `round(v * 255)`.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use gdrkit_core::ImageRgb;
use image::{ImageFormat, RgbImage};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("missing file: {}", .0.display())]
    Missing(PathBuf),
    #[error("cannot read {}: {reason}", path.display())]
    Unreadable { path: PathBuf, reason: String },
    #[error("cannot decode {}: {reason}", path.display())]
    Undecodable { path: PathBuf, reason: String },
    #[error("zero-dimension image: {}", .0.display())]
    ZeroDimension(PathBuf),
    #[error("cannot write {}: {reason}", path.display())]
    Unwritable { path: PathBuf, reason: String },
}

pub fn load_image(path: &Path) -> Result<ImageRgb, IoError> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => IoError::Missing(path.to_path_buf()),
        _ => IoError::Unreadable {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
    })?;
    if png_header_dims(&bytes).is_some_and(|(w, h)| w == 0 || h == 0) {
        return Err(IoError::ZeroDimension(path.to_path_buf()));
    }
    let decoded = image::load_from_memory(&bytes).map_err(|e| IoError::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(IoError::ZeroDimension(path.to_path_buf()));
    }
    let data = rgb.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
    ImageRgb::new(w as usize, h as usize, data).map_err(|e| IoError::Undecodable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Width and height from a PNG IHDR chunk. Decoders reject zero sizes as
/// malformed, so they are detected here first.
fn png_header_dims(bytes: &[u8]) -> Option<(u32, u32)> {
    const SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];
    if bytes.len() < 24 || bytes[..8] != SIGNATURE || &bytes[12..16] != b"IHDR" {
        return None;
    }
    let be = |i: usize| u32::from_be_bytes(bytes[i..i + 4].try_into().expect("four bytes"));
    Some((be(16), be(20)))
}

/// 8-bit RGB buffer of `img`.
pub fn quantize(img: &ImageRgb) -> Vec<u8> {
    img.data().iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect()
}

/// PNG encoding of `img`.
pub fn encode_png(img: &ImageRgb) -> Vec<u8> {
    let buf = RgbImage::from_raw(img.width() as u32, img.height() as u32, quantize(img))
        .expect("buffer length matches dimensions");
    let mut out = Cursor::new(Vec::new());
    buf.write_to(&mut out, ImageFormat::Png)
        .expect("in-memory PNG encoding does not fail");
    out.into_inner()
}

pub fn save_image(img: &ImageRgb, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, encode_png(img)).map_err(|e| IoError::Unwritable {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}
