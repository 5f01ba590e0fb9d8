//! Deterministic inputs shared by the benchmarks.

use qkernel::data::{synth_generate, SynthConfig};
use qkernel::{seed, FeatureVector, GrayImage};
use rand::Rng;

/// `count` angle vectors of length `n`, uniform in [0, π].
pub fn angle_set(count: usize, n: usize, s: u64) -> Vec<FeatureVector> {
    let mut rng = seed::rng(s);
    (0..count)
        .map(|_| {
            let v = (0..n)
                .map(|_| rng.random_range(0.0..std::f64::consts::PI))
                .collect();
            FeatureVector::new(v).expect("finite angles")
        })
        .collect()
}

/// Flattened synthetic images at the given size, with labels.
pub fn image_set(width: usize, height: usize, per_class: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let config = SynthConfig {
        width,
        height,
        normal_count: per_class,
        anomaly_count: per_class,
        ..SynthConfig::default()
    };
    let ds = synth_generate(&config, 1).expect("valid config");
    (ds.images(), ds.labels())
}

/// A noise image for the preprocessing benches.
pub fn noise_image(width: usize, height: usize) -> GrayImage {
    let mut rng = seed::rng(3);
    let pixels = (0..width * height).map(|_| rng.random::<f64>()).collect();
    GrayImage::new(width, height, pixels).expect("valid size")
}
