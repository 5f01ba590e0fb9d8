//! Kernel × feature-count × repeat sweeps and their report files.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{load_dataset, stratified_split, synth_generate, LabeledDataset, SynthConfig};
use crate::error::{Error, Result};
use crate::featuremaps::{build_feature_map, FeatureVector, KernelId};
use crate::kernel::{concentration_probe, ConcentrationRow, KernelMode};
use crate::learn::{contribution_ratios, evaluate, pca_fit, EvalReport, PcaModel, SvmParams};
use crate::pipeline::fit_kernel_svm;
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synthetic {
        #[serde(default)]
        config: SynthConfig,
        /// Generator seed; derived from the master seed when absent.
        #[serde(default)]
        seed: Option<u64>,
    },
    Directory {
        path: PathBuf,
    },
}

impl Default for DatasetSource {
    fn default() -> Self {
        DatasetSource::Synthetic {
            config: SynthConfig::default(),
            seed: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmSettings {
    pub c: f64,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for SvmSettings {
    fn default() -> Self {
        let p = SvmParams::default();
        SvmSettings {
            c: p.c,
            tol: p.tol,
            max_passes: p.max_passes,
        }
    }
}

impl SvmSettings {
    pub fn params(&self, seed: u64) -> SvmParams {
        SvmParams {
            c: self.c,
            tol: self.tol,
            max_passes: self.max_passes,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Preprocess {
    /// Box-downscale factor applied before PCA.
    pub downscale: Option<usize>,
    /// Binarization threshold; off when absent.
    pub binarize: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConcentrationSettings {
    pub kernels: Vec<KernelId>,
    pub n_qubits: Vec<usize>,
    pub pairs: usize,
}

impl Default for ConcentrationSettings {
    fn default() -> Self {
        ConcentrationSettings {
            kernels: vec![KernelId::Qk9],
            n_qubits: vec![2, 4, 6, 8],
            pairs: 500,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub features: Vec<usize>,
    pub kernels: Vec<KernelId>,
    pub mode: KernelMode,
    pub svm: SvmSettings,
    pub repeats: usize,
    pub seed: u64,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub preprocess: Preprocess,
    /// Draw a fresh train/test split for every repeat.
    pub resplit_per_repeat: bool,
    pub concentration: Option<ConcentrationSettings>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetSource::default(),
            features: (3..=10).collect(),
            kernels: KernelId::ALL.to_vec(),
            mode: KernelMode::Exact,
            svm: SvmSettings::default(),
            repeats: 1,
            seed: 0,
            train_per_class: 24,
            test_per_class: 9,
            preprocess: Preprocess::default(),
            resplit_per_repeat: false,
            concentration: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.kernels.is_empty() {
            return bad("kernel list is empty".into());
        }
        if self.features.is_empty() {
            return bad("feature list is empty".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.train_per_class == 0 || self.test_per_class == 0 {
            return bad("split sizes must be positive".into());
        }
        if let Some(&k) = self.features.iter().find(|&&k| k == 0) {
            return bad(format!("feature count {k} must be at least 1"));
        }
        let max_k = 2 * self.train_per_class - 1;
        if let Some(&k) = self.features.iter().find(|&&k| k > max_k) {
            return bad(format!(
                "feature count {k} exceeds {max_k} (training samples - 1)"
            ));
        }
        if let Some(&k) = self
            .features
            .iter()
            .find(|&&k| k > crate::circuit::MAX_QUBITS)
        {
            return bad(format!(
                "feature count {k} exceeds the {}-qubit simulator limit",
                crate::circuit::MAX_QUBITS
            ));
        }
        for &kernel in &self.kernels {
            if let Some(min) = kernel.min_qubits() {
                if let Some(&k) = self.features.iter().find(|&&k| k < min) {
                    return bad(format!("{kernel} needs at least {min} features, got {k}"));
                }
            }
            if !kernel.is_quantum() && !self.mode.is_exact() {
                return bad(format!("{kernel} has no shot mode"));
            }
        }
        if self.mode.shots() == Some(0) {
            return bad("shot count must be positive".into());
        }
        if !(self.svm.c > 0.0 && self.svm.tol > 0.0) {
            return bad("svm c and tol must be positive".into());
        }
        if self.preprocess.downscale == Some(0) {
            return bad("downscale factor must be at least 1".into());
        }
        if let Some(c) = &self.concentration {
            if c.kernels.iter().any(|k| !k.is_quantum()) {
                return bad("concentration probe only applies to quantum kernels".into());
            }
            if c.pairs < 2 || c.n_qubits.is_empty() {
                return bad("concentration probe needs register sizes and at least 2 pairs".into());
            }
        }
        Ok(())
    }

    /// Seed handed to the synthetic generator.
    pub fn dataset_seed(&self) -> u64 {
        match &self.dataset {
            DatasetSource::Synthetic { seed: Some(s), .. } => *s,
            _ => seed::derive(self.seed, &[seed::label("dataset")]),
        }
    }

    fn split_seed(&self, repeat: usize) -> u64 {
        let r = if self.resplit_per_repeat {
            repeat as u64
        } else {
            0
        };
        seed::derive(self.seed, &[seed::label("split"), r])
    }

    fn n_splits(&self) -> usize {
        if self.resplit_per_repeat {
            self.repeats
        } else {
            1
        }
    }
}

/// Load or generate the dataset and apply the configured preprocessing.
pub fn load_source(config: &ExperimentConfig) -> Result<LabeledDataset> {
    let raw = match &config.dataset {
        DatasetSource::Synthetic { config: synth, .. } => {
            synth_generate(synth, config.dataset_seed())?
        }
        DatasetSource::Directory { path } => load_dataset(path)?,
    };
    preprocess(&raw, &config.preprocess)
}

pub fn preprocess(dataset: &LabeledDataset, pre: &Preprocess) -> Result<LabeledDataset> {
    let mut out = dataset.clone();
    if let Some(f) = pre.downscale {
        out = out.map_images(|img| img.downscale_box(f))?;
    }
    if let Some(t) = pre.binarize {
        out = out.map_images(|img| Ok(img.binarize(t)))?;
    }
    Ok(out)
}

/// One train/test split with PCA fit on the training images only.
pub struct SplitFeatures {
    pub split_seed: u64,
    pub pca: PcaModel,
    pub train_scores: Vec<FeatureVector>,
    pub test_scores: Vec<FeatureVector>,
    pub train_labels: Vec<f64>,
    pub test_labels: Vec<f64>,
}

pub fn split_features(
    train: &LabeledDataset,
    test: &LabeledDataset,
    k: usize,
    split_seed: u64,
) -> Result<SplitFeatures> {
    let train_images = train.images();
    let pca = pca_fit(&train_images, k)?;
    let project = |images: Vec<Vec<f64>>| -> Result<Vec<FeatureVector>> {
        images.iter().map(|x| pca.transform(x)).collect()
    };
    let train_scores = project(train_images)?;
    let test_scores = project(test.images())?;
    Ok(SplitFeatures {
        split_seed,
        pca,
        train_scores,
        test_scores,
        train_labels: train.labels(),
        test_labels: test.labels(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub source: String,
    pub normal: usize,
    pub anomaly: usize,
    pub width: usize,
    pub height: usize,
    pub train: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub split: usize,
    pub eigenvalues: Vec<f64>,
    pub cr: Vec<f64>,
    pub ccr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramSummary {
    pub train_rows: usize,
    pub test_rows: usize,
    pub min_eigenvalue: f64,
    pub clipped: bool,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthInfo {
    pub gates: usize,
    pub logical: usize,
    pub decomposed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmSummary {
    pub bias: f64,
    pub support_vectors: usize,
    pub converged: bool,
    pub sweeps: usize,
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub kernel: KernelId,
    pub features: usize,
    pub repeat: usize,
    pub split: usize,
    pub eval: EvalReport,
    pub gram: GramSummary,
    pub depth: Option<DepthInfo>,
    pub svm: SvmSummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub kernel: KernelId,
    pub features: usize,
    pub repeats: usize,
    pub f1_min: f64,
    pub f1_mean: f64,
    pub f1_max: f64,
    pub auc_min: f64,
    pub auc_mean: f64,
    pub auc_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub kernel: KernelId,
    pub qubits: usize,
    pub gates: usize,
    pub logical_depth: usize,
    pub decomposed_depth: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationEntry {
    pub kernel: KernelId,
    pub rows: Vec<ConcentrationRow>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub kernel: String,
    pub features: usize,
    pub repeat: usize,
    pub seconds: f64,
}

/// Wall-clock timings, kept apart from the deterministic report.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub total_seconds: f64,
    pub cells: Vec<CellTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub dataset: Option<DatasetSummary>,
    pub pca: Vec<PcaSummary>,
    pub cells: Vec<CellReport>,
    pub aggregates: Vec<Aggregate>,
    pub depth: Vec<DepthRow>,
    pub concentration: Vec<ConcentrationEntry>,
    #[serde(skip)]
    pub timings: Timings,
}

impl RunReport {
    /// A report with no cells.
    pub fn empty(config: ExperimentConfig) -> Self {
        RunReport {
            config,
            dataset: None,
            pca: Vec::new(),
            cells: Vec::new(),
            aggregates: Vec::new(),
            depth: Vec::new(),
            concentration: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn cell(&self, kernel: KernelId, features: usize, repeat: usize) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.kernel == kernel && c.features == features && c.repeat == repeat)
    }

    pub fn aggregate(&self, kernel: KernelId, features: usize) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.kernel == kernel && a.features == features)
    }
}

struct CellJob {
    kernel: KernelId,
    features: usize,
    repeat: usize,
    split: usize,
}

/// Run the full sweep. Output is independent of thread scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let started = Instant::now();
    let dataset = load_source(config)?;
    let k_max = *config.features.iter().max().expect("validated nonempty");

    let splits = (0..config.n_splits())
        .map(|s| {
            let split_seed = config.split_seed(s);
            let (train, test) = stratified_split(
                &dataset,
                config.train_per_class,
                config.test_per_class,
                split_seed,
            )?;
            split_features(&train, &test, k_max, split_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let first = &dataset.samples()[0].image;
    let summary = DatasetSummary {
        source: match &config.dataset {
            DatasetSource::Synthetic { .. } => "synthetic".into(),
            DatasetSource::Directory { path } => path.display().to_string(),
        },
        normal: dataset.count(crate::data::Label::Normal),
        anomaly: dataset.count(crate::data::Label::Anomaly),
        width: first.width(),
        height: first.height(),
        train: 2 * config.train_per_class,
        test: 2 * config.test_per_class,
    };
    let pca = splits
        .iter()
        .enumerate()
        .filter_map(|(i, s)| {
            contribution_ratios(&s.pca)
                .ok()
                .map(|(cr, ccr)| PcaSummary {
                    split: i,
                    eigenvalues: s.pca.eigenvalues.clone(),
                    cr,
                    ccr,
                })
        })
        .collect();

    let mut jobs = Vec::new();
    for &kernel in &config.kernels {
        for &features in &config.features {
            for repeat in 0..config.repeats {
                let split = if config.resplit_per_repeat { repeat } else { 0 };
                jobs.push(CellJob {
                    kernel,
                    features,
                    repeat,
                    split,
                });
            }
        }
    }
    let results = jobs
        .par_iter()
        .map(|job| {
            let t = Instant::now();
            let cell = run_cell(config, &splits[job.split], job)?;
            Ok((cell, t.elapsed().as_secs_f64()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut timings = Timings::default();
    let mut cells = Vec::with_capacity(results.len());
    for (cell, secs) in results {
        timings.cells.push(CellTiming {
            kernel: cell.kernel.to_string(),
            features: cell.features,
            repeat: cell.repeat,
            seconds: secs,
        });
        cells.push(cell);
    }
    let aggregates = aggregate(&cells);
    let depth = depth_rows(&cells);
    let concentration = match &config.concentration {
        Some(c) => c
            .kernels
            .iter()
            .map(|&kernel| {
                let probe_seed = seed::derive(
                    config.seed,
                    &[seed::label("concentration"), seed::label(kernel.tag())],
                );
                Ok(ConcentrationEntry {
                    kernel,
                    rows: concentration_probe(kernel, &c.n_qubits, c.pairs, probe_seed)?,
                })
            })
            .collect::<Result<Vec<_>>>()?,
        None => Vec::new(),
    };
    timings.total_seconds = started.elapsed().as_secs_f64();

    Ok(RunReport {
        config: config.clone(),
        dataset: Some(summary),
        pca,
        cells,
        aggregates,
        depth,
        concentration,
        timings,
    })
}

fn run_cell(config: &ExperimentConfig, split: &SplitFeatures, job: &CellJob) -> Result<CellReport> {
    let k = job.features;
    let truncate = |xs: &[FeatureVector]| -> Result<Vec<FeatureVector>> {
        xs.iter().map(|x| x.truncated(k)).collect()
    };
    let train_scores = truncate(&split.train_scores)?;
    let test_scores = truncate(&split.test_scores)?;
    let scaler = crate::featuremaps::AngleScaler::fit(&train_scores)?;
    let scale_all = |xs: &[FeatureVector]| -> Result<Vec<FeatureVector>> {
        xs.iter().map(|x| scaler.transform(x)).collect()
    };
    let train_angles = scale_all(&train_scores)?;
    let test_angles = scale_all(&test_scores)?;

    let tag = seed::label(job.kernel.tag());
    // Shot sampling varies with the repeat; SMO sweep order does not, so an
    // exact-mode repeat reproduces its cell exactly.
    let shot_seed = seed::derive(config.seed, &[tag, k as u64, job.repeat as u64]);
    let svm_seed = seed::derive(config.seed, &[tag, k as u64, seed::label("svm")]);
    let depth = if job.kernel.is_quantum() {
        let circuit = build_feature_map(job.kernel, &train_angles[0])?;
        Some(DepthInfo {
            gates: circuit.len(),
            logical: circuit.logical_depth(),
            decomposed: circuit.decomposed_depth(),
        })
    } else {
        None
    };

    let fitted = fit_kernel_svm(
        job.kernel,
        config.mode,
        train_angles,
        &split.train_labels,
        &config.svm.params(svm_seed),
        shot_seed,
    )?;
    let scores = fitted.model.decision(&test_angles)?;
    let eval = evaluate(&scores, &split.test_labels)?;
    let svm = &fitted.model.svm;

    Ok(CellReport {
        kernel: job.kernel,
        features: k,
        repeat: job.repeat,
        split: job.split,
        eval,
        gram: GramSummary {
            train_rows: fitted.train_gram.rows,
            test_rows: test_angles.len(),
            min_eigenvalue: fitted.raw_min_eigenvalue,
            clipped: !config.mode.is_exact(),
            gamma: fitted.model.gamma,
        },
        depth,
        svm: SvmSummary {
            bias: svm.bias,
            support_vectors: svm.support_indices.len(),
            converged: svm.converged,
            sweeps: svm.sweeps,
            objective: svm.objective,
        },
    })
}

fn min_mean_max(values: &[f64]) -> (f64, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Summing equal values can drift by an ulp; keep min = mean = max exact.
    let mean = if min == max {
        min
    } else {
        (values.iter().sum::<f64>() / values.len() as f64).clamp(min, max)
    };
    (min, mean, max)
}

fn aggregate(cells: &[CellReport]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(usize, usize), (KernelId, Vec<&CellReport>)> = BTreeMap::new();
    for c in cells {
        let order = KernelId::ALL
            .iter()
            .position(|&k| k == c.kernel)
            .unwrap_or(0);
        groups
            .entry((order, c.features))
            .or_insert_with(|| (c.kernel, Vec::new()))
            .1
            .push(c);
    }
    groups
        .into_values()
        .map(|(kernel, group)| {
            let f1: Vec<f64> = group.iter().map(|c| c.eval.f1).collect();
            let auc: Vec<f64> = group.iter().map(|c| c.eval.auc).collect();
            let (f1_min, f1_mean, f1_max) = min_mean_max(&f1);
            let (auc_min, auc_mean, auc_max) = min_mean_max(&auc);
            Aggregate {
                kernel,
                features: group[0].features,
                repeats: group.len(),
                f1_min,
                f1_mean,
                f1_max,
                auc_min,
                auc_mean,
                auc_max,
            }
        })
        .collect()
}

fn depth_rows(cells: &[CellReport]) -> Vec<DepthRow> {
    let mut rows: Vec<DepthRow> = Vec::new();
    for c in cells.iter().filter(|c| c.repeat == 0) {
        if let Some(d) = &c.depth {
            rows.push(DepthRow {
                kernel: c.kernel,
                qubits: c.features,
                gates: d.gates,
                logical_depth: d.logical,
                decomposed_depth: d.decomposed,
            });
        }
    }
    rows
}

fn write(path: PathBuf, text: String, written: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Write the report files and return their paths.
pub fn emit_report(report: &RunReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    write(out_dir.join("report.json"), report.to_json(), &mut written)?;
    if report.cells.is_empty() {
        return Ok(written);
    }
    let timings = serde_json::to_string_pretty(&report.timings).expect("timings serialize") + "\n";
    write(out_dir.join("timings.json"), timings, &mut written)?;

    let mut f1 = String::from("kernel,features,f1_min,f1_mean,f1_max\n");
    for a in &report.aggregates {
        f1.push_str(&format!(
            "{},{},{},{},{}\n",
            a.kernel, a.features, a.f1_min, a.f1_mean, a.f1_max
        ));
    }
    write(out_dir.join("f1_vs_features.csv"), f1, &mut written)?;

    for c in &report.cells {
        let name = if c.repeat == 0 {
            format!("roc_{}_{}.csv", c.kernel, c.features)
        } else {
            format!("roc_{}_{}_r{}.csv", c.kernel, c.features, c.repeat)
        };
        write(out_dir.join(name), c.eval.roc_csv(), &mut written)?;
    }

    if !report.depth.is_empty() {
        write(
            out_dir.join("depth_report.csv"),
            depth_csv(&report.depth),
            &mut written,
        )?;
    }
    if !report.concentration.is_empty() {
        write(
            out_dir.join("concentration.csv"),
            concentration_csv(&report.concentration),
            &mut written,
        )?;
    }
    Ok(written)
}

pub fn depth_csv(rows: &[DepthRow]) -> String {
    let mut out = String::from("kernel,qubits,gates,logical_depth,decomposed_depth\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.kernel, r.qubits, r.gates, r.logical_depth, r.decomposed_depth
        ));
    }
    out
}

pub fn concentration_csv(entries: &[ConcentrationEntry]) -> String {
    let mut out = String::from("kernel,n_qubits,pairs,mean,variance\n");
    for e in entries {
        for r in &e.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.kernel, r.n_qubits, r.pairs, r.mean, r.variance
            ));
        }
    }
    out
}

/// Depth of every quantum kernel's circuit at each register size.
pub fn depth_report(kernels: &[KernelId], qubits: &[usize]) -> Result<Vec<DepthRow>> {
    let mut rows = Vec::new();
    for &kernel in kernels.iter().filter(|k| k.is_quantum()) {
        for &n in qubits {
            let angles = FeatureVector::new(vec![std::f64::consts::FRAC_PI_4; n])?;
            let circuit = build_feature_map(kernel, &angles)?;
            rows.push(DepthRow {
                kernel,
                qubits: n,
                gates: circuit.len(),
                logical_depth: circuit.logical_depth(),
                decomposed_depth: circuit.decomposed_depth(),
            });
        }
    }
    Ok(rows)
}
