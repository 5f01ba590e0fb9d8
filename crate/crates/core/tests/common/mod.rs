//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use qkernel::seed;
use qkernel::FeatureVector;
use rand::Rng;

/// Fraction of (positive, negative) pairs ranked correctly, ties counted ½.
pub fn mann_whitney(scores: &[f64], truth: &[f64]) -> f64 {
    let pos: Vec<f64> = scores
        .iter()
        .zip(truth)
        .filter(|p| *p.1 > 0.0)
        .map(|p| *p.0)
        .collect();
    let neg: Vec<f64> = scores
        .iter()
        .zip(truth)
        .filter(|p| *p.1 <= 0.0)
        .map(|p| *p.0)
        .collect();
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n {
                1.0
            } else if p == n {
                0.5
            } else {
                0.0
            };
        }
    }
    wins / (pos.len() * neg.len()) as f64
}

/// Dual objective `Σα - ½ αᵀQα` with `Q_ij = y_i y_j K_ij`.
pub fn dual(k: &[[f64; 4]; 4], y: &[f64; 4], a: &[f64; 4]) -> f64 {
    let mut quad = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            quad += a[i] * a[j] * y[i] * y[j] * k[i][j];
        }
    }
    a.iter().sum::<f64>() - 0.5 * quad
}

/// Brute-force maximum of the 4-point dual with labels (+1, +1, -1, -1).
///
/// The equality constraint forces `α1 + α2 = α3 + α4 = s`. `α1` and `α3` are
/// stepped over `[0, C]` on a grid of width `step`; for each grid point the
/// objective is a concave quadratic in `s` on an interval and is maximized in
/// closed form.
pub fn grid_dual_max(k: &[[f64; 4]; 4], c: f64, step: f64) -> f64 {
    let y = [1.0, 1.0, -1.0, -1.0];
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let e = [0.0, 1.0, 0.0, 1.0];
    let curvature: f64 = (0..4)
        .flat_map(|i| (0..4).map(move |j| (i, j)))
        .map(|(i, j)| e[i] * e[j] * q(i, j))
        .sum();
    let points = (c / step).ceil() as usize;
    let mut best = f64::NEG_INFINITY;
    for i1 in 0..=points {
        let a1 = (i1 as f64 * step).min(c);
        for i3 in 0..=points {
            let a3 = (i3 as f64 * step).min(c);
            let base = [a1, -a1, a3, -a3];
            let slope = 2.0
                - (0..4)
                    .flat_map(|i| (0..4).map(move |j| (i, j)))
                    .map(|(i, j)| e[i] * q(i, j) * base[j])
                    .sum::<f64>();
            let lo = a1.max(a3);
            let hi = a1.min(a3) + c;
            let s = if curvature > 0.0 {
                (slope / curvature).clamp(lo, hi)
            } else if slope > 0.0 {
                hi
            } else {
                lo
            };
            let alpha = [a1, s - a1, a3, s - a3];
            best = best.max(dual(k, &y, &alpha));
        }
    }
    best
}

pub fn random_angles(rng: &mut seed::Rng, n: usize) -> FeatureVector {
    FeatureVector::new(
        (0..n)
            .map(|_| rng.random_range(0.0..=std::f64::consts::PI))
            .collect(),
    )
    .unwrap()
}
