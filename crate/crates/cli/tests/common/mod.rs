#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use image::{Rgb, RgbImage};

/// Deterministic test scene: colour ramps, a disc, stripes and a checker
/// corner, so patches carry both smooth and textured content.
pub fn scene(width: u32, height: u32) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let (fx, fy) = (x as f64 / width as f64, y as f64 / height as f64);
        let disc = (fx - 0.35).powi(2) + (fy - 0.4).powi(2) < 0.04;
        let r = if disc { 0.85 } else { 0.15 + 0.6 * fx };
        let g = if fy > 0.7 {
            0.3 + 0.4 * (fx * 12.0).sin().abs()
        } else {
            0.25 + 0.5 * fy
        };
        let checker = fx > 0.75 && fy < 0.25 && ((x / 4 + y / 4) % 2 == 0);
        let b = if checker {
            0.9
        } else {
            0.5 + 0.2 * ((fx + fy) * 6.0).cos()
        };
        Rgb([r, g, b].map(|v| (v * 255.0).round() as u8))
    })
}

/// Per-channel `gain·v + offset` on values in [0, 1].
pub fn affine_distort(img: &RgbImage, gain: f64, offset: f64) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y).0;
        Rgb(p.map(|v| ((gain * v as f64 / 255.0 + offset) * 255.0).round().clamp(0.0, 255.0) as u8))
    })
}

pub fn save(img: &RgbImage, dir: &Path, name: &str) -> PathBuf {
    let path = dir.join(name);
    img.save(&path).unwrap();
    path
}

pub fn sl2d(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sl2d")).args(args).output().unwrap()
}

pub fn trace_column(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}
