//! Image input (8-bit PNG, grayscale or RGB) and float map output (PFM).

use std::io::Write;
use std::path::Path;

use crate::render::gabor::GrayImage;
use crate::{Error, Result};

/// Load a PNG as grayscale in [0, 1] (RGB is averaged with Rec.601 weights).
pub fn load_png_gray(path: impl AsRef<Path>) -> Result<GrayImage> {
    let img = image::open(path.as_ref()).map_err(|e| Error::Format {
        path: path.as_ref().display().to_string(),
        reason: e.to_string(),
    })?;
    let gray = img.to_luma8();
    let (w, h) = (gray.width() as usize, gray.height() as usize);
    let pixels = gray.pixels().map(|p| p.0[0] as f64 / 255.0).collect();
    GrayImage::new(w, h, pixels)
}

/// Write a grayscale float map as little-endian PFM (`Pf`, negative scale).
/// PFM stores rows bottom-to-top.
pub fn write_pfm(path: impl AsRef<Path>, width: usize, height: usize, data: &[f64]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {width}x{height}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(32 + data.len() * 4);
    write!(out, "Pf\n{width} {height}\n-1.0\n")?;
    for y in (0..height).rev() {
        for x in 0..width {
            out.extend_from_slice(&(data[y * width + x] as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Write a grayscale image as 8-bit PNG (values clamped to [0, 1]).
pub fn write_png_gray(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    data: &[f64],
) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {width}x{height}",
            data.len()
        )));
    }
    let buf: Vec<u8> = data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(width as u32, height as u32, buf)
        .expect("buffer sized above");
    img.save(path.as_ref()).map_err(|e| Error::Format {
        path: path.as_ref().display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip() {
        let dir = std::env::temp_dir().join("fur_imgio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("t.png");
        let data: Vec<f64> = (0..64 * 32).map(|i| (i % 256) as f64 / 255.0).collect();
        write_png_gray(&p, 64, 32, &data).unwrap();
        let back = load_png_gray(&p).unwrap();
        assert_eq!(back.width, 64);
        assert_eq!(back.height, 32);
        for (a, b) in back.pixels.iter().zip(&data) {
            assert!((a - b).abs() < 1.0 / 255.0 + 1e-9);
        }
    }

    #[test]
    fn pfm_header_and_order() {
        let dir = std::env::temp_dir().join("fur_imgio_test");
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("t.pfm");
        write_pfm(&p, 2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert!(bytes.starts_with(b"Pf\n2 2\n-1.0\n"));
        // Bottom row first.
        let body = &bytes[bytes.len() - 16..];
        let v = f32::from_le_bytes(body[0..4].try_into().unwrap());
        assert_eq!(v, 3.0);
    }
}
