//! RGB images with colour channels in `[0, 1]`, and 8-bit PNG conversion.

use std::path::Path;

use image::RgbImage;
use ndarray::Array3;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Height × width × 3 image, channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColourImage<T> {
    pub pixels: Array3<T>,
}

impl<T: Real> ColourImage<T> {
    pub fn new(pixels: Array3<T>) -> Result<Self> {
        if pixels.dim().2 != 3 {
            return Err(Error::dim(format!(
                "expected 3 colour channels, got {}",
                pixels.dim().2
            )));
        }
        Ok(Self { pixels })
    }

    pub fn filled(height: usize, width: usize, rgb: [T; 3]) -> Self {
        let pixels = Array3::from_shape_fn((height, width, 3), |(_, _, c)| rgb[c]);
        Self { pixels }
    }

    pub fn height(&self) -> usize {
        self.pixels.dim().0
    }

    pub fn width(&self) -> usize {
        self.pixels.dim().1
    }

    /// Channels divided by 255.
    pub fn from_rgb8(img: &RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let scale = T::lit(255.0);
        let pixels = Array3::from_shape_fn((h as usize, w as usize, 3), |(y, x, c)| {
            T::from_u8(img.get_pixel(x as u32, y as u32).0[c]).unwrap() / scale
        });
        Self { pixels }
    }

    /// Clamps to `[0, 1]` and quantizes with round-half-up.
    pub fn to_rgb8(&self) -> RgbImage {
        let (h, w, _) = self.pixels.dim();
        RgbImage::from_fn(w as u32, h as u32, |x, y| {
            let mut px = [0u8; 3];
            for (c, out) in px.iter_mut().enumerate() {
                *out = quantize(self.pixels[[y as usize, x as usize, c]]);
            }
            image::Rgb(px)
        })
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        load_rgb8(path).map(|img| Self::from_rgb8(&img))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        save_rgb8(&self.to_rgb8(), path)
    }
}

fn quantize<T: Real>(v: T) -> u8 {
    let v = v.to_f64_lossy();
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0 + 0.5).floor().min(255.0) as u8
}

pub fn load_rgb8(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let img = reader
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?
        .decode()
        .map_err(|source| Error::Image {
            path: path.display().to_string(),
            source,
        })?;
    Ok(img.to_rgb8())
}

pub fn save_rgb8(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| match source {
            image::ImageError::IoError(source) => Error::Io {
                path: path.display().to_string(),
                source,
            },
            source => Error::Image {
                path: path.display().to_string(),
                source,
            },
        })
}
