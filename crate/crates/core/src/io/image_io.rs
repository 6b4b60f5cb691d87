//! 8-bit image files as grayscale rasters in `[0, 1]`.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat};

use crate::error::Result;
use crate::features::luma;
use crate::grid::Image;

use super::atomic_write;

/// Reads any supported image; color is reduced to luma.
pub fn read_image(path: &Path) -> Result<Image> {
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
        other => other
            .to_rgb32f()
            .pixels()
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect(),
    };
    Image::new(w, h, data)
}

/// Writes an 8-bit grayscale PNG; values are clamped and rounded to
/// multiples of 1/255.
pub fn write_image(path: &Path, img: &Image) -> Result<()> {
    let raw: Vec<u8> = img.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let gray = GrayImage::from_raw(img.width as u32, img.height as u32, raw)
        .expect("raster length matches its dimensions");
    let mut buf = Cursor::new(Vec::new());
    gray.write_to(&mut buf, ImageFormat::Png)?;
    atomic_write(path, &buf.into_inner())
}
