use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremaps::KernelId;
use crate::kernel::GramMatrix;
use crate::seed;

/// Curvature floor used when a pair has a non-positive second derivative.
const TAU: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    /// Upper bound on full sweeps over the training set.
    pub max_passes: usize,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            tol: 1e-3,
            max_passes: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub dual_coefficients: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    pub support_indices: Vec<usize>,
    pub c: f64,
    pub tol: f64,
    pub kernel: Option<KernelId>,
    pub sweeps: usize,
    pub converged: bool,
    pub objective: f64,
}

impl SvmModel {
    pub fn n_train(&self) -> usize {
        self.labels.len()
    }

    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        if kernel_row.len() != self.n_train() {
            return Err(Error::shape(format!(
                "kernel row has {} entries, model has {} training points",
                kernel_row.len(),
                self.n_train()
            )));
        }
        Ok(self
            .support_indices
            .iter()
            .map(|&i| self.dual_coefficients[i] * self.labels[i] * kernel_row[i])
            .sum::<f64>()
            + self.bias)
    }

    /// Scores for every row of a test-by-train Gram matrix.
    pub fn decision_gram(&self, gram: &GramMatrix) -> Result<Vec<f64>> {
        if gram.cols != self.n_train() {
            return Err(Error::shape(format!(
                "Gram has {} columns, model has {} training points",
                gram.cols,
                self.n_train()
            )));
        }
        (0..gram.rows).map(|i| self.decision(gram.row(i))).collect()
    }
}

pub fn svm_decision(model: &SvmModel, kernel_row: &[f64]) -> Result<f64> {
    model.decision(kernel_row)
}

/// Train a C-SVM on a precomputed square Gram matrix.
pub fn svm_train_smo(gram: &GramMatrix, labels: &[f64], params: &SvmParams) -> Result<SvmModel> {
    if !gram.is_square() {
        return Err(Error::shape(format!(
            "SVM needs a square Gram matrix, got {}x{}",
            gram.rows, gram.cols
        )));
    }
    let mut model = train_smo(&gram.values, labels, params)?;
    model.kernel = Some(gram.kernel);
    Ok(model)
}

/// SMO on a row-major `n x n` kernel matrix.
///
/// Works with the gradient form `F_i = y_i - Σ_j α_j y_j K_ij`. A point can
/// move up if `y=+1, α<C` or `y=-1, α>0`, down if `y=+1, α>0` or `y=-1, α<C`.
/// The dual is optimal to `tol` once `max F(up) - min F(down) <= tol`.
pub fn train_smo(k: &[f64], labels: &[f64], params: &SvmParams) -> Result<SvmModel> {
    let n = labels.len();
    if k.len() != n * n {
        return Err(Error::shape(format!(
            "{} kernel entries for {n} labels",
            k.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::argument(format!("labels must be ±1, got {bad}")));
    }
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return Err(Error::argument("SVM labels must contain both classes"));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::argument(format!(
            "C must be positive, got {}",
            params.c
        )));
    }
    if !(params.tol > 0.0) {
        return Err(Error::argument(format!(
            "tol must be positive, got {}",
            params.tol
        )));
    }

    let mut smo = Smo {
        k,
        y: labels,
        c: params.c,
        alpha: vec![0.0; n],
        f: labels.to_vec(),
    };
    let mut rng = seed::rng(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sweeps = 0;
    while sweeps < params.max_passes {
        sweeps += 1;
        order.shuffle(&mut rng);
        let mut changed = 0;
        for &i in &order {
            if smo.examine(i, params.tol) {
                changed += 1;
            }
        }
        if changed == 0 {
            break;
        }
    }
    let (up, low) = smo.extremes();
    let converged = up - low <= params.tol;

    let free: Vec<f64> = (0..n)
        .filter(|&i| smo.alpha[i] > 0.0 && smo.alpha[i] < params.c)
        .map(|i| smo.f[i])
        .collect();
    let bias = if free.is_empty() {
        (up + low) / 2.0
    } else {
        free.iter().sum::<f64>() / free.len() as f64
    };
    let objective = dual_objective(k, labels, &smo.alpha);
    let support_indices = (0..n).filter(|&i| smo.alpha[i] > 0.0).collect();

    Ok(SvmModel {
        dual_coefficients: smo.alpha,
        labels: labels.to_vec(),
        bias,
        support_indices,
        c: params.c,
        tol: params.tol,
        kernel: None,
        sweeps,
        converged,
        objective,
    })
}

/// `Σα - ½ ΣΣ α_i α_j y_i y_j K_ij`.
pub fn dual_objective(k: &[f64], labels: &[f64], alpha: &[f64]) -> f64 {
    let n = labels.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * labels[i] * labels[j] * k[i * n + j];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct Smo<'a> {
    k: &'a [f64],
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    f: Vec<f64>,
}

impl Smo<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn kij(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n() + j]
    }

    fn in_up(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] < self.c
        } else {
            self.alpha[i] > 0.0
        }
    }

    fn in_low(&self, i: usize) -> bool {
        if self.y[i] > 0.0 {
            self.alpha[i] > 0.0
        } else {
            self.alpha[i] < self.c
        }
    }

    /// (max F over the up set, min F over the down set).
    fn extremes(&self) -> (f64, f64) {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..self.n() {
            if self.in_up(i) {
                up = up.max(self.f[i]);
            }
            if self.in_low(i) {
                low = low.min(self.f[i]);
            }
        }
        (up, low)
    }

    /// Try to fix a KKT violation at `i`; true if any multiplier moved.
    fn examine(&mut self, i: usize, tol: f64) -> bool {
        let (up, low) = self.extremes();
        let fi = self.f[i];
        let mut candidates: Vec<(usize, usize)> = Vec::new();
        if self.in_up(i) && fi > low + tol {
            candidates.extend(
                (0..self.n())
                    .filter(|&j| self.in_low(j) && self.f[j] < fi - tol)
                    .map(|j| (i, j)),
            );
        }
        if self.in_low(i) && fi < up - tol {
            candidates.extend(
                (0..self.n())
                    .filter(|&j| self.in_up(j) && self.f[j] > fi + tol)
                    .map(|j| (j, i)),
            );
        }
        let partner = |&(a, b): &(usize, usize)| if a == i { b } else { a };
        candidates.sort_by(|p, q| {
            let gp = (self.f[p.0] - self.f[p.1]).abs();
            let gq = (self.f[q.0] - self.f[q.1]).abs();
            gq.total_cmp(&gp).then(partner(p).cmp(&partner(q)))
        });
        candidates.into_iter().any(|(a, b)| self.step(a, b))
    }

    /// Move along `α_a += y_a t, α_b -= y_b t`, which keeps `Σ α y` fixed.
    fn step(&mut self, a: usize, b: usize) -> bool {
        let eta = (self.kij(a, a) + self.kij(b, b) - 2.0 * self.kij(a, b)).max(TAU);
        let unconstrained = (self.f[a] - self.f[b]) / eta;
        let room_a = if self.y[a] > 0.0 {
            self.c - self.alpha[a]
        } else {
            self.alpha[a]
        };
        let room_b = if self.y[b] > 0.0 {
            self.alpha[b]
        } else {
            self.c - self.alpha[b]
        };
        let t = unconstrained.min(room_a).min(room_b);
        if !(t > 0.0) {
            return false;
        }

        self.alpha[a] += self.y[a] * t;
        self.alpha[b] -= self.y[b] * t;
        // Snap to the box so bound membership is exact.
        if t == room_a {
            self.alpha[a] = if self.y[a] > 0.0 { self.c } else { 0.0 };
        }
        if t == room_b {
            self.alpha[b] = if self.y[b] > 0.0 { 0.0 } else { self.c };
        }
        for kk in 0..self.n() {
            self.f[kk] -= t * (self.kij(kk, a) - self.kij(kk, b));
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_gram(points: &[Vec<f64>]) -> Vec<f64> {
        points
            .iter()
            .flat_map(|a| {
                points
                    .iter()
                    .map(move |b| a.iter().zip(b).map(|(x, y)| x * y).sum())
            })
            .collect()
    }

    fn rbf_gram(points: &[Vec<f64>], gamma: f64) -> Vec<f64> {
        points
            .iter()
            .flat_map(|a| {
                points.iter().map(move |b| {
                    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
                    (-gamma * d2).exp()
                })
            })
            .collect()
    }

    fn check_kkt(model: &SvmModel, k: &[f64], slack: f64) {
        let n = model.n_train();
        for i in 0..n {
            let row = &k[i * n..(i + 1) * n];
            let margin = model.labels[i] * model.decision(row).unwrap();
            let a = model.dual_coefficients[i];
            if a == 0.0 {
                assert!(margin >= 1.0 - slack, "α=0 point {i}: margin {margin}");
            } else if a == model.c {
                assert!(margin <= 1.0 + slack, "α=C point {i}: margin {margin}");
            } else {
                assert!(
                    (margin - 1.0).abs() <= slack,
                    "free point {i}: margin {margin}"
                );
            }
        }
    }

    #[test]
    fn two_point_analytic() {
        let k = [1.0, -1.0, -1.0, 1.0];
        let params = SvmParams {
            c: 10.0,
            ..SvmParams::default()
        };
        let model = train_smo(&k, &[1.0, -1.0], &params).unwrap();
        assert!((model.dual_coefficients[0] - 0.5).abs() < 1e-6);
        assert!((model.dual_coefficients[1] - 0.5).abs() < 1e-6);
        assert!(model.bias.abs() < 1e-6);
        assert!(model.converged);
        assert!((model.decision(&k[..2]).unwrap() - 1.0).abs() < 1e-6);
        assert!((model.decision(&k[2..]).unwrap() + 1.0).abs() < 1e-6);
    }

    #[test]
    fn zero_alpha_scores_bias() {
        let model = SvmModel {
            dual_coefficients: vec![0.0; 3],
            labels: vec![1.0, -1.0, 1.0],
            bias: 0.25,
            support_indices: vec![],
            c: 1.0,
            tol: 1e-3,
            kernel: None,
            sweeps: 0,
            converged: true,
            objective: 0.0,
        };
        assert_eq!(model.decision(&[5.0, -2.0, 9.0]).unwrap(), 0.25);
        assert!(matches!(model.decision(&[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn train_errors() {
        let k = [1.0, 0.0, 0.0, 1.0];
        let p = SvmParams::default();
        assert!(matches!(
            train_smo(&k, &[1.0, 1.0], &p),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            train_smo(&k, &[1.0, 0.0], &p),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            train_smo(&k[..3], &[1.0, -1.0], &p),
            Err(Error::Shape(_))
        ));
        let bad_c = SvmParams { c: 0.0, ..p };
        assert!(matches!(
            train_smo(&k, &[1.0, -1.0], &bad_c),
            Err(Error::Argument(_))
        ));
        let g = GramMatrix {
            kernel: KernelId::Rbf,
            mode: crate::kernel::KernelMode::Exact,
            rows: 1,
            cols: 2,
            values: vec![1.0, 0.5],
        };
        assert!(matches!(
            svm_train_smo(&g, &[1.0], &p),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn duplicated_training_set_keeps_decision() {
        // Separable, with C large enough that no multiplier reaches the box.
        let mut rng = seed::rng(21);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for i in 0..10 {
            let y = if i % 2 == 0 { 1.0 } else { -1.0 };
            points.push(vec![
                y * 1.5 + rng.random_range(-0.5..0.5),
                rng.random_range(-1.0..1.0),
            ]);
            labels.push(y);
        }
        let params = SvmParams {
            c: 100.0,
            tol: 1e-9,
            max_passes: 10_000,
            seed: 3,
        };
        let base = train_smo(&linear_gram(&points), &labels, &params).unwrap();
        assert!(base.converged);
        assert!(base.dual_coefficients.iter().all(|&a| a < params.c));

        let doubled: Vec<Vec<f64>> = points.iter().chain(points.iter()).cloned().collect();
        let doubled_labels: Vec<f64> = labels.iter().chain(labels.iter()).copied().collect();
        let twice = train_smo(&linear_gram(&doubled), &doubled_labels, &params).unwrap();
        assert!(twice.converged);

        for _ in 0..25 {
            let t = vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let row = |pts: &[Vec<f64>]| -> Vec<f64> {
                pts.iter().map(|p| p[0] * t[0] + p[1] * t[1]).collect()
            };
            let a = base.decision(&row(&points)).unwrap();
            let b = twice.decision(&row(&doubled)).unwrap();
            assert!((a - b).abs() < 1e-5, "{a} vs {b}");
        }
    }

    #[test]
    fn sweep_cap_reports_non_convergence() {
        let mut rng = seed::rng(30);
        let points: Vec<Vec<f64>> = (0..30)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels: Vec<f64> = (0..30)
            .map(|i| if i % 3 == 0 { 1.0 } else { -1.0 })
            .collect();
        let params = SvmParams {
            c: 50.0,
            tol: 1e-12,
            max_passes: 1,
            seed: 0,
        };
        let model = train_smo(&rbf_gram(&points, 5.0), &labels, &params).unwrap();
        assert_eq!(model.sweeps, 1);
        assert!(!model.converged);
    }

    #[test]
    fn deterministic_for_seed() {
        let mut rng = seed::rng(31);
        let points: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let labels: Vec<f64> = (0..20)
            .map(|i| if points[i][0] > 0.0 { 1.0 } else { -1.0 })
            .collect();
        let k = rbf_gram(&points, 1.0);
        let params = SvmParams::default();
        assert_eq!(
            train_smo(&k, &labels, &params).unwrap(),
            train_smo(&k, &labels, &params).unwrap()
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn kkt_and_feasibility(
            raw in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, any::<bool>()), 4..24),
            c in 0.1f64..10.0,
            gamma in 0.1f64..3.0,
            seed in any::<u64>(),
        ) {
            let mut labels: Vec<f64> = raw.iter().map(|r| if r.2 { 1.0 } else { -1.0 }).collect();
            labels[0] = 1.0;
            labels[1] = -1.0;
            let points: Vec<Vec<f64>> = raw.iter().map(|r| vec![r.0, r.1]).collect();
            let k = rbf_gram(&points, gamma);
            let params = SvmParams { c, tol: 1e-3, max_passes: 10_000, seed };
            let model = train_smo(&k, &labels, &params).unwrap();
            prop_assert!(model.converged);
            for &a in &model.dual_coefficients {
                prop_assert!((0.0..=c).contains(&a));
            }
            let balance: f64 = model.dual_coefficients.iter().zip(&labels).map(|(a, y)| a * y).sum();
            prop_assert!(balance.abs() < 1e-6);
            check_kkt(&model, &k, 1e-3 + 1e-9);
            prop_assert!((model.objective - dual_objective(&k, &labels, &model.dual_coefficients)).abs() < 1e-12);
        }
    }
}
