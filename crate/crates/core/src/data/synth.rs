use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Label, LabeledDataset, Provenance, Sample};
use super::GrayImage;
use crate::error::{Error, Result};
use crate::seed;

/// Parameters of the synthetic apple images.
///
/// Every sample is a bright disk on a dark background with pixel noise.
/// Anomalies add a dark line segment (the crack) inside an inspection region
/// whose area is `crack_region_fraction` of the image, with the 3:2 aspect of
/// a 120×80 window. Browning is a soft dark blotch applied to either class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub width: usize,
    pub height: usize,
    /// Disk radius as a fraction of the shorter image side.
    pub apple_radius: f64,
    pub apple_brightness: f64,
    /// Standard deviation of a per-image gain on the disk.
    pub brightness_jitter: f64,
    pub background: f64,
    pub noise_sigma: f64,
    pub crack_region_fraction: f64,
    pub crack_width: f64,
    pub crack_contrast: f64,
    /// Maximum crack center offset from the disk center, in pixels.
    pub crack_jitter: f64,
    pub browning_fraction: f64,
    pub browning_radius: f64,
    pub browning_depth: f64,
    pub normal_count: usize,
    pub anomaly_count: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            width: 128,
            height: 96,
            apple_radius: 0.4,
            apple_brightness: 0.8,
            brightness_jitter: 0.02,
            background: 0.05,
            noise_sigma: 0.05,
            crack_region_fraction: 0.03,
            crack_width: 3.0,
            crack_contrast: 0.5,
            crack_jitter: 4.0,
            browning_fraction: 0.3,
            browning_radius: 6.0,
            browning_depth: 0.25,
            normal_count: 33,
            anomaly_count: 33,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.normal_count == 0 || self.anomaly_count == 0 {
            return Err(Error::argument("synthetic class counts must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::argument("synthetic image size must be positive"));
        }
        let unit = [
            ("apple_radius", self.apple_radius),
            ("apple_brightness", self.apple_brightness),
            ("background", self.background),
            ("crack_region_fraction", self.crack_region_fraction),
            ("crack_contrast", self.crack_contrast),
            ("browning_fraction", self.browning_fraction),
            ("browning_depth", self.browning_depth),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::argument(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        let nonneg = [
            ("brightness_jitter", self.brightness_jitter),
            ("noise_sigma", self.noise_sigma),
            ("crack_width", self.crack_width),
            ("crack_jitter", self.crack_jitter),
            ("browning_radius", self.browning_radius),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::argument(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    /// Width and height of the crack inspection region in pixels.
    pub fn crack_region(&self) -> (f64, f64) {
        let area = self.crack_region_fraction * (self.width * self.height) as f64;
        let h = (area / 1.5).sqrt();
        (1.5 * h, h)
    }
}

/// Generate normals then anomalies; images are quantized to 8 bits so they
/// survive a PGM round trip unchanged.
pub fn synth_generate(config: &SynthConfig, seed: u64) -> Result<LabeledDataset> {
    config.validate()?;
    let jobs: Vec<(Label, usize)> = (0..config.normal_count)
        .map(|i| (Label::Normal, i))
        .chain((0..config.anomaly_count).map(|i| (Label::Anomaly, i)))
        .collect();
    let samples = jobs
        .par_iter()
        .map(|&(label, i)| {
            let s = seed::derive(seed, &[seed::label(label.name()), i as u64]);
            Ok(Sample {
                name: format!("{}_{i:03}", label.name()),
                label,
                image: render(config, label, s)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(
        samples,
        Provenance::Synthetic {
            config: config.clone(),
            seed,
        },
    )
}

fn render(config: &SynthConfig, label: Label, s: u64) -> Result<GrayImage> {
    let mut rng = seed::rng(s);
    let (w, h) = (config.width, config.height);
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let radius = config.apple_radius * w.min(h) as f64;
    let gain = 1.0 + config.brightness_jitter * standard_normal(&mut rng);

    let crack = if label == Label::Anomaly {
        let (rw, _) = config.crack_region();
        let jitter = config.crack_jitter;
        let mx = cx + rng.random_range(-1.0..=1.0) * jitter;
        let my = cy + rng.random_range(-1.0..=1.0) * jitter;
        let angle = rng.random_range(-0.35..=0.35f64);
        let (dx, dy) = (rw / 2.0 * angle.cos(), rw / 2.0 * angle.sin());
        Some(((mx - dx, my - dy), (mx + dx, my + dy)))
    } else {
        None
    };
    let blotch = if rng.random::<f64>() < config.browning_fraction {
        let r = rng.random::<f64>().sqrt() * radius * 0.6;
        let t = rng.random_range(0.0..std::f64::consts::TAU);
        Some((cx + r * t.cos(), cy + r * t.sin()))
    } else {
        None
    };

    let noise = Normal::new(0.0, config.noise_sigma)
        .map_err(|e| Error::argument(format!("noise_sigma: {e}")))?;
    let mut pixels = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
            let r = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt() / radius;
            let mut v = if r <= 1.0 {
                // Brightest at the center, dimming toward the rim.
                config.background
                    + (config.apple_brightness * gain - config.background) * (1.0 - 0.35 * r * r)
            } else {
                config.background
            };
            if let Some((bx, by)) = blotch {
                let d2 = (px - bx).powi(2) + (py - by).powi(2);
                let sigma = config.browning_radius.max(1e-9);
                v *= 1.0 - config.browning_depth * (-d2 / (2.0 * sigma * sigma)).exp();
            }
            if let Some((a, b)) = crack {
                if segment_distance((px, py), a, b) <= config.crack_width / 2.0 {
                    v -= config.crack_contrast;
                }
            }
            v += noise.sample(&mut rng);
            pixels.push((v.clamp(0.0, 1.0) * 255.0).round() / 255.0);
        }
    }
    GrayImage::new(w, h, pixels)
}

fn standard_normal(rng: &mut seed::Rng) -> f64 {
    rand_distr::StandardNormal.sample(rng)
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * vx + (p.1 - a.1) * vy) / len2).clamp(0.0, 1.0)
    };
    ((p.0 - a.0 - t * vx).powi(2) + (p.1 - a.1 - t * vy).powi(2)).sqrt()
}
