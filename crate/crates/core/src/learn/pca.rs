use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremaps::FeatureVector;

/// Principal components of mean-centered data.
///
/// Eigenvalues are population variances (divided by the sample count) along
/// each component, sorted descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    /// Sum of every eigenvalue of the centered covariance, kept or not.
    pub total_variance: f64,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, image: &[f64]) -> Result<FeatureVector> {
        if image.len() != self.dim() {
            return Err(Error::shape(format!(
                "PCA fit on {} values, got {}",
                self.dim(),
                image.len()
            )));
        }
        let scores = self
            .components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(image.iter().zip(&self.mean))
                    .map(|(w, (x, m))| w * (x - m))
                    .sum()
            })
            .collect();
        FeatureVector::new(scores)
    }

    /// Map scores back into input space (`mean + Σ score_i · component_i`).
    pub fn reconstruct(&self, scores: &[f64]) -> Result<Vec<f64>> {
        if scores.len() != self.n_components() {
            return Err(Error::shape(format!(
                "{} scores for {} components",
                scores.len(),
                self.n_components()
            )));
        }
        let mut out = self.mean.clone();
        for (s, c) in scores.iter().zip(&self.components) {
            for (o, w) in out.iter_mut().zip(c) {
                *o += s * w;
            }
        }
        Ok(out)
    }

    /// Keep only the leading `k` components.
    pub fn truncated(&self, k: usize) -> Result<PcaModel> {
        if k == 0 || k > self.n_components() {
            return Err(Error::argument(format!(
                "cannot keep {k} of {} components",
                self.n_components()
            )));
        }
        Ok(PcaModel {
            mean: self.mean.clone(),
            components: self.components[..k].to_vec(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            total_variance: self.total_variance,
        })
    }
}

/// Fit the top `k` principal components.
///
/// When the dimension exceeds the sample count the eigenproblem is solved on
/// the `m x m` sample Gram matrix `X Xᵀ / m` and lifted back with
/// `v = Xᵀ u / sqrt(m λ)`; otherwise the `d x d` covariance is used directly.
pub fn pca_fit(images: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let m = images.len();
    if m < 2 {
        return Err(Error::argument(format!(
            "PCA needs at least 2 samples, got {m}"
        )));
    }
    let d = images[0].len();
    if let Some(bad) = images.iter().position(|x| x.len() != d) {
        return Err(Error::shape(format!(
            "sample {bad} has {} values, expected {d}",
            images[bad].len()
        )));
    }
    if k == 0 || k > (m - 1).min(d) {
        return Err(Error::argument(format!(
            "k = {k} must be between 1 and min(samples - 1, dimension) = {}",
            (m - 1).min(d)
        )));
    }
    if images.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::argument("PCA input contains non-finite values"));
    }

    let mut mean = vec![0.0; d];
    for x in images {
        for (acc, v) in mean.iter_mut().zip(x) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m as f64);

    let centered = DMatrix::from_fn(m, d, |i, j| images[i][j] - mean[j]);
    let total_variance = centered.norm_squared() / m as f64;

    let (eigenvalues, mut components) = if d <= m {
        let cov = centered.transpose() * &centered / m as f64;
        let (values, vectors) = sorted_eigen(cov);
        let comps: Vec<Vec<f64>> = (0..k)
            .map(|c| vectors.column(c).iter().copied().collect())
            .collect();
        (values[..k].to_vec(), comps)
    } else {
        let gram = &centered * centered.transpose() / m as f64;
        let (values, vectors) = sorted_eigen(gram);
        let floor = 1e-12 * values[0].max(f64::MIN_POSITIVE);
        let mut comps = Vec::with_capacity(k);
        for c in 0..k {
            if values[c] <= floor {
                break;
            }
            let lifted: DVector<f64> =
                centered.transpose() * vectors.column(c) / (m as f64 * values[c]).sqrt();
            comps.push(lifted.iter().copied().collect());
        }
        (values[..k].to_vec(), comps)
    };

    // Directions beyond the data rank carry no variance; complete the basis
    // so every requested component is still a unit vector.
    complete_basis(&mut components, k, d);
    let eigenvalues = eigenvalues.into_iter().map(|l| l.max(0.0)).collect();
    for c in &mut components {
        fix_sign(c);
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues,
        total_variance,
    })
}

pub fn pca_transform(model: &PcaModel, image: &[f64]) -> Result<FeatureVector> {
    model.transform(image)
}

/// Per-component share of total variance and its running sum.
pub fn contribution_ratios(model: &PcaModel) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(model.total_variance > 0.0) {
        return Err(Error::DegenerateData(
            "total variance is zero; contribution ratios are undefined".into(),
        ));
    }
    let cr: Vec<f64> = model
        .eigenvalues
        .iter()
        .map(|l| l / model.total_variance)
        .collect();
    let ccr = cumulative_contribution(&cr);
    Ok((cr, ccr))
}

pub fn cumulative_contribution(cr: &[f64]) -> Vec<f64> {
    cr.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

fn sorted_eigen(sym: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    (values, vectors)
}

fn complete_basis(components: &mut Vec<Vec<f64>>, k: usize, d: usize) {
    let mut axis = 0;
    while components.len() < k && axis < d {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        axis += 1;
        for c in components.iter() {
            let dot: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(x, w)| *x -= dot * w);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            components.push(v);
        }
    }
}

/// Flip so the entry of largest magnitude is positive.
fn fix_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |best, (i, x)| {
            if x.abs() > best.1.abs() {
                (i, *x)
            } else {
                best
            }
        })
        .1;
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn random_data(rng: &mut seed::Rng, m: usize, d: usize) -> Vec<Vec<f64>> {
        (0..m)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn one_dimensional_spread() {
        let model = pca_fit(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1).unwrap();
        assert_eq!(model.components[0].len(), 2);
        assert!((model.components[0][0] - 1.0).abs() < 1e-12);
        assert!(model.components[0][1].abs() < 1e-12);
        assert!((model.eigenvalues[0] - 1.0).abs() < 1e-12);
        let (cr, ccr) = contribution_ratios(&model).unwrap();
        assert!((cr[0] - 1.0).abs() < 1e-12);
        assert!((ccr[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn both_eigen_paths_agree() {
        let mut rng = seed::rng(4);
        // 6 samples in 4 dims uses the covariance; 6 samples in 40 dims uses the Gram trick.
        for d in [4, 40] {
            let data = random_data(&mut rng, 6, d);
            let model = pca_fit(&data, 3).unwrap();
            let m = data.len() as f64;
            // Oracle: Rayleigh quotient of the explicit covariance along each component.
            for (c, lambda) in model.components.iter().zip(&model.eigenvalues) {
                let var = data
                    .iter()
                    .map(|x| {
                        let centered: Vec<f64> =
                            x.iter().zip(&model.mean).map(|(a, b)| a - b).collect();
                        dot(&centered, c).powi(2)
                    })
                    .sum::<f64>()
                    / m;
                assert!((var - lambda).abs() < 1e-10, "d={d}: {var} vs {lambda}");
            }
        }
    }

    #[test]
    fn components_orthonormal_and_sorted() {
        let mut rng = seed::rng(5);
        let data = random_data(&mut rng, 12, 300);
        let model = pca_fit(&data, 11).unwrap();
        for i in 0..11 {
            for j in 0..11 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&model.components[i], &model.components[j]) - expect).abs() < 1e-8);
            }
        }
        assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(model.eigenvalues.iter().all(|&l| l >= -1e-10));
        // With k = m - 1 every nonzero eigenvalue is kept.
        let sum: f64 = model.eigenvalues.iter().sum();
        assert!((sum - model.total_variance).abs() / model.total_variance < 1e-8);
    }

    #[test]
    fn round_trip_at_full_rank() {
        let mut rng = seed::rng(6);
        let data = random_data(&mut rng, 8, 50);
        let model = pca_fit(&data, 7).unwrap();
        for x in &data {
            let scores = model.transform(x).unwrap();
            let back = model.reconstruct(&scores).unwrap();
            for (a, b) in back.iter().zip(x) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn duplicated_dataset_keeps_directions() {
        let mut rng = seed::rng(7);
        let data = random_data(&mut rng, 10, 30);
        let base = pca_fit(&data, 3).unwrap();
        let doubled: Vec<Vec<f64>> = data.iter().chain(data.iter()).cloned().collect();
        let twice = pca_fit(&doubled, 3).unwrap();
        for (a, b) in base.components.iter().zip(&twice.components) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-8);
            }
        }
        for (a, b) in base.eigenvalues.iter().zip(&twice.eigenvalues) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn transform_examples() {
        let mut rng = seed::rng(8);
        let data = random_data(&mut rng, 9, 25);
        let model = pca_fit(&data, 4).unwrap();
        let zero = model.transform(&model.mean).unwrap();
        assert!(zero.iter().all(|v| v.abs() < 1e-12));

        let shifted: Vec<f64> = model
            .mean
            .iter()
            .zip(&model.components[0])
            .map(|(m, c)| m + c)
            .collect();
        let scores = model.transform(&shifted).unwrap();
        assert!((scores[0] - 1.0).abs() < 1e-10);
        assert!(scores[1..].iter().all(|v| v.abs() < 1e-10));

        for _ in 0..20 {
            let x: Vec<f64> = (0..25).map(|_| rng.random_range(-3.0..3.0)).collect();
            let s = model.transform(&x).unwrap();
            let norm_s = dot(&s, &s).sqrt();
            let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(a, b)| a - b).collect();
            assert!(norm_s <= dot(&centered, &centered).sqrt() + 1e-8);
        }
        assert!(matches!(model.transform(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn rank_deficient_data_still_yields_unit_components() {
        // Three samples on a line in 5 dims: rank 1, ask for 2 components.
        let data = vec![
            vec![1.0, 2.0, 0.0, 0.0, 0.0],
            vec![2.0, 4.0, 0.0, 0.0, 0.0],
            vec![3.0, 6.0, 0.0, 0.0, 0.0],
        ];
        let model = pca_fit(&data, 2).unwrap();
        assert_eq!(model.n_components(), 2);
        assert!(model.eigenvalues[1].abs() < 1e-12);
        assert!(dot(&model.components[0], &model.components[1]).abs() < 1e-8);
        assert!((dot(&model.components[1], &model.components[1]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(pca_fit(&[vec![1.0]], 1), Err(Error::Argument(_))));
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 2.0]];
        assert!(matches!(pca_fit(&data, 3), Err(Error::Argument(_))));
        assert!(matches!(pca_fit(&data, 0), Err(Error::Argument(_))));
        assert!(matches!(
            pca_fit(&[vec![0.0, 1.0], vec![1.0]], 1),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn contribution_ratio_examples() {
        let ccr = cumulative_contribution(&[0.4390, 0.1210, 0.0593, 0.0423]);
        for (a, b) in ccr.iter().zip([0.4390, 0.5600, 0.6193, 0.6616]) {
            assert!((a - b).abs() < 1e-12);
        }
        let flat = PcaModel {
            mean: vec![0.0; 2],
            components: vec![vec![1.0, 0.0]],
            eigenvalues: vec![0.0],
            total_variance: 0.0,
        };
        assert!(matches!(
            contribution_ratios(&flat),
            Err(Error::DegenerateData(_))
        ));

        let mut rng = seed::rng(9);
        let model = pca_fit(&random_data(&mut rng, 15, 20), 10).unwrap();
        let (_, ccr) = contribution_ratios(&model).unwrap();
        assert!(ccr.windows(2).all(|w| w[1] >= w[0]));
        assert!(*ccr.last().unwrap() <= 1.0 + 1e-10);
    }
}
