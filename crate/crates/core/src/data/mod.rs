//! Grayscale images, PGM files, the synthetic apple generator and dataset splits.

mod dataset;
mod pgm;
mod synth;

pub use dataset::{
    load_dataset, save_dataset, stratified_split, Label, LabeledDataset, Provenance, Sample,
};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use synth::{synth_generate, SynthConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::shape(format!("empty image {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(Error::shape(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::argument(format!("pixel value {bad} outside [0, 1]")));
        }
        Ok(GrayImage {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn downscale_box(&self, factor: usize) -> Result<GrayImage> {
        downscale_box(self, factor)
    }

    pub fn binarize(&self, threshold: f64) -> GrayImage {
        binarize(self, threshold)
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.pixels.clone()
    }
}

/// Block-mean downscale. Output dimensions round up; edge blocks average
/// only the pixels they cover.
pub fn downscale_box(image: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 {
        return Err(Error::argument("downscale factor must be at least 1"));
    }
    let w = image.width.div_ceil(factor);
    let h = image.height.div_ceil(factor);
    let mut pixels = Vec::with_capacity(w * h);
    for by in 0..h {
        let ys = by * factor..((by + 1) * factor).min(image.height);
        for bx in 0..w {
            let xs = bx * factor..((bx + 1) * factor).min(image.width);
            let mut sum = 0.0;
            for y in ys.clone() {
                sum += image.pixels[y * image.width + xs.start..y * image.width + xs.end]
                    .iter()
                    .sum::<f64>();
            }
            let v = sum / (ys.len() * xs.len()) as f64;
            pixels.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage::new(w, h, pixels)
}

pub fn binarize(image: &GrayImage, threshold: f64) -> GrayImage {
    GrayImage {
        width: image.width,
        height: image.height,
        pixels: image
            .pixels
            .iter()
            .map(|&v| if v >= threshold { 1.0 } else { 0.0 })
            .collect(),
    }
}

pub fn flatten(image: &GrayImage) -> Vec<f64> {
    image.flatten()
}
