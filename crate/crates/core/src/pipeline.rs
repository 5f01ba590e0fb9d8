//! Images to angles to kernel to classifier, shared by the experiment runner
//! and the command-line train/evaluate steps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremaps::{AngleScaler, FeatureVector, KernelId};
use crate::kernel::{default_gamma, gram, psd_clip, GramMatrix, GramOptions, KernelMode};
use crate::learn::{pca_fit, svm_train_smo, PcaModel, SvmModel, SvmParams};
use crate::seed;

/// PCA followed by min-max angle scaling, both fit on training images only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeaturePipeline {
    pub pca: PcaModel,
    pub scaler: AngleScaler,
}

impl FeaturePipeline {
    pub fn fit(train_images: &[Vec<f64>], k: usize) -> Result<Self> {
        let pca = pca_fit(train_images, k)?;
        Self::from_pca(pca, train_images)
    }

    /// Fit the scaler on the scores of an already fitted PCA.
    pub fn from_pca(pca: PcaModel, train_images: &[Vec<f64>]) -> Result<Self> {
        let scores = train_images
            .iter()
            .map(|x| pca.transform(x))
            .collect::<Result<Vec<_>>>()?;
        let scaler = AngleScaler::fit(&scores)?;
        Ok(FeaturePipeline { pca, scaler })
    }

    pub fn features(&self) -> usize {
        self.pca.n_components()
    }

    pub fn angles(&self, image: &[f64]) -> Result<FeatureVector> {
        self.scaler.transform(&self.pca.transform(image)?)
    }

    pub fn angles_all(&self, images: &[Vec<f64>]) -> Result<Vec<FeatureVector>> {
        images.iter().map(|x| self.angles(x)).collect()
    }
}

/// Everything needed to score new samples with a precomputed-kernel SVM.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSvm {
    pub kernel: KernelId,
    pub mode: KernelMode,
    /// Seed for shot sampling of test kernel rows.
    pub seed: u64,
    pub gamma: Option<f64>,
    pub train_angles: Vec<FeatureVector>,
    pub svm: SvmModel,
}

/// Training outcome plus the train Gram matrix the SVM saw.
pub struct Fitted {
    pub model: KernelSvm,
    pub train_gram: GramMatrix,
    /// Smallest eigenvalue of the train Gram before any clipping.
    pub raw_min_eigenvalue: f64,
}

/// Build the train Gram (clipped to PSD in shot mode) and run SMO.
pub fn fit_kernel_svm(
    kernel: KernelId,
    mode: KernelMode,
    train_angles: Vec<FeatureVector>,
    labels: &[f64],
    params: &SvmParams,
    seed: u64,
) -> Result<Fitted> {
    if train_angles.len() != labels.len() {
        return Err(Error::shape(format!(
            "{} training vectors for {} labels",
            train_angles.len(),
            labels.len()
        )));
    }
    let gamma = if kernel.is_quantum() {
        None
    } else {
        Some(default_gamma(&train_angles)?)
    };
    let options = GramOptions {
        mode,
        seed: seed::derive(seed, &[1]),
        gamma,
    };
    let raw = gram(kernel, &train_angles, &train_angles, &options)?;
    let raw_min_eigenvalue = raw.min_eigenvalue()?;
    let train_gram = psd_clip(&raw)?;
    let svm = svm_train_smo(&train_gram, labels, params)?;
    Ok(Fitted {
        model: KernelSvm {
            kernel,
            mode,
            seed: seed::derive(seed, &[2]),
            gamma,
            train_angles,
            svm,
        },
        train_gram,
        raw_min_eigenvalue,
    })
}

impl KernelSvm {
    /// Test-by-train Gram matrix for new angle vectors.
    pub fn kernel_rows(&self, angles: &[FeatureVector]) -> Result<GramMatrix> {
        let options = GramOptions {
            mode: self.mode,
            seed: self.seed,
            gamma: self.gamma,
        };
        gram(self.kernel, angles, &self.train_angles, &options)
    }

    pub fn decision(&self, angles: &[FeatureVector]) -> Result<Vec<f64>> {
        self.svm.decision_gram(&self.kernel_rows(angles)?)
    }
}

/// A feature pipeline and classifier bundled for saving as one JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub features: FeaturePipeline,
    pub classifier: KernelSvm,
}

impl TrainedModel {
    pub fn fit(
        kernel: KernelId,
        mode: KernelMode,
        train_images: &[Vec<f64>],
        labels: &[f64],
        k: usize,
        params: &SvmParams,
        seed: u64,
    ) -> Result<Self> {
        let features = FeaturePipeline::fit(train_images, k)?;
        let angles = features.angles_all(train_images)?;
        let fitted = fit_kernel_svm(kernel, mode, angles, labels, params, seed)?;
        Ok(TrainedModel {
            features,
            classifier: fitted.model,
        })
    }

    pub fn scores(&self, images: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.classifier.decision(&self.features.angles_all(images)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{stratified_split, synth_generate, SynthConfig};
    use crate::learn::evaluate;

    fn small_split() -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
        let cfg = SynthConfig {
            width: 40,
            height: 30,
            normal_count: 14,
            anomaly_count: 14,
            ..SynthConfig::default()
        };
        let ds = synth_generate(&cfg, 17).unwrap();
        let (train, test) = stratified_split(&ds, 10, 4, 1).unwrap();
        (train.images(), train.labels(), test.images(), test.labels())
    }

    #[test]
    fn angles_lie_in_range_on_training_data() {
        let (images, ..) = small_split();
        let p = FeaturePipeline::fit(&images, 4).unwrap();
        for a in p.angles_all(&images).unwrap() {
            assert_eq!(a.len(), 4);
            assert!(a.iter().all(|&v| (0.0..=std::f64::consts::PI).contains(&v)));
        }
    }

    #[test]
    fn fit_and_score_round_trip_through_json() {
        let (train, y, test, truth) = small_split();
        for kernel in [KernelId::Qk1, KernelId::Rbf] {
            let model = TrainedModel::fit(
                kernel,
                KernelMode::Exact,
                &train,
                &y,
                3,
                &SvmParams::default(),
                5,
            )
            .unwrap();
            let scores = model.scores(&test).unwrap();
            assert_eq!(scores.len(), test.len());
            evaluate(&scores, &truth).unwrap();
            let back: TrainedModel =
                serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
            assert_eq!(back.scores(&test).unwrap(), scores);
        }
    }

    #[test]
    fn shot_mode_train_gram_is_clipped() {
        let (train, y, ..) = small_split();
        let p = FeaturePipeline::fit(&train, 3).unwrap();
        let fitted = fit_kernel_svm(
            KernelId::Qk9,
            KernelMode::Shots(64),
            p.angles_all(&train).unwrap(),
            &y,
            &SvmParams::default(),
            2,
        )
        .unwrap();
        assert!(fitted.train_gram.min_eigenvalue().unwrap() >= -1e-10);
    }

    #[test]
    fn rbf_shots_rejected() {
        let (train, y, ..) = small_split();
        let err = TrainedModel::fit(
            KernelId::Rbf,
            KernelMode::Shots(10),
            &train,
            &y,
            3,
            &SvmParams::default(),
            0,
        );
        assert!(matches!(err, Err(Error::Argument(_))));
    }
}
