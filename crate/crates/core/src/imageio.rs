//! Grayscale image output: binary PGM and 8-bit PNG.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::Matrix;

fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Nearest-neighbour upscale by an integer factor.
pub fn upscale(img: &Matrix, factor: usize) -> Matrix {
    Matrix::from_fn(img.rows() * factor, img.cols() * factor, |r, c| {
        img.get(r / factor, c / factor)
    })
}

pub fn pgm_bytes(img: &Matrix) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.cols(), img.rows()).into_bytes();
    out.extend(img.data().iter().map(|&v| to_byte(v)));
    out
}

pub fn png_bytes(img: &Matrix) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.cols() as u32, img.rows() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::Data(format!("png header: {e}")))?;
        let bytes: Vec<u8> = img.data().iter().map(|&v| to_byte(v)).collect();
        writer
            .write_image_data(&bytes)
            .map_err(|e| Error::Data(format!("png data: {e}")))?;
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, img: &Matrix) -> Result<()> {
    std::fs::write(path, pgm_bytes(img)).map_err(|e| Error::io(path, e))
}

pub fn write_png(path: &Path, img: &Matrix) -> Result<()> {
    std::fs::write(path, png_bytes(img)?).map_err(|e| Error::io(path, e))
}

/// Tiles equally sized images left to right.
pub fn tile_row(images: &[Matrix]) -> Matrix {
    let Some(first) = images.first() else {
        return Matrix::zeros(0, 0);
    };
    let (h, w) = first.shape();
    Matrix::from_fn(h, w * images.len(), |r, c| images[c / w].get(r, c % w))
}
