use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::pgm::{load_pgm, save_pgm};
use super::synth::SynthConfig;
use super::GrayImage;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
}

impl Label {
    pub const BOTH: [Label; 2] = [Label::Normal, Label::Anomaly];

    /// SVM target: anomalies are the positive class.
    pub fn value(self) -> f64 {
        match self {
            Label::Normal => -1.0,
            Label::Anomaly => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomaly => "anomaly",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub name: String,
    pub label: Label,
    pub image: GrayImage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Synthetic {
        config: SynthConfig,
        seed: u64,
    },
    Directory {
        path: PathBuf,
    },
    /// A subset of another dataset.
    Split {
        parent: Box<Provenance>,
        part: String,
        seed: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    provenance: Provenance,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>, provenance: Provenance) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::argument("dataset is empty"));
        }
        Ok(LabeledDataset {
            samples,
            provenance,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: Label) -> usize {
        self.samples.iter().filter(|s| s.label == label).count()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.label.value()).collect()
    }

    pub fn images(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.image.flatten()).collect()
    }

    /// Apply an image transform to every sample.
    pub fn map_images(&self, f: impl Fn(&GrayImage) -> Result<GrayImage>) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    name: s.name.clone(),
                    label: s.label,
                    image: f(&s.image)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(LabeledDataset {
            samples,
            provenance: self.provenance.clone(),
        })
    }
}

/// Draw disjoint per-class train and test subsets.
///
/// Each part lists normals first, then anomalies, each in original order.
pub fn stratified_split(
    dataset: &LabeledDataset,
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if train_per_class == 0 || test_per_class == 0 {
        return Err(Error::argument("split sizes must be positive"));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in Label::BOTH {
        let mut idx: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.samples[i].label == label)
            .collect();
        if idx.len() < train_per_class + test_per_class {
            return Err(Error::argument(format!(
                "{} {label} samples, need {} for a {train_per_class}/{test_per_class} split",
                idx.len(),
                train_per_class + test_per_class
            )));
        }
        idx.shuffle(&mut seed::rng(seed::derive(
            seed,
            &[seed::label(label.name())],
        )));
        let mut tr = idx[..train_per_class].to_vec();
        let mut te = idx[train_per_class..train_per_class + test_per_class].to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.extend(tr.into_iter().map(|i| dataset.samples[i].clone()));
        test.extend(te.into_iter().map(|i| dataset.samples[i].clone()));
    }
    let part = |name: &str, samples| {
        LabeledDataset::new(
            samples,
            Provenance::Split {
                parent: Box::new(dataset.provenance.clone()),
                part: name.into(),
                seed,
            },
        )
    };
    Ok((part("train", train)?, part("test", test)?))
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    provenance: Provenance,
    files: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    file: String,
    label: Label,
}

/// Write `<root>/normal/*.pgm`, `<root>/anomaly/*.pgm` and `manifest.json`.
pub fn save_dataset(dataset: &LabeledDataset, root: &Path) -> Result<()> {
    let mut files = Vec::with_capacity(dataset.len());
    for label in Label::BOTH {
        let dir = root.join(label.name());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    for s in &dataset.samples {
        let file = format!("{}/{}.pgm", s.label.name(), s.name);
        save_pgm(&s.image, &root.join(&file))?;
        files.push(ManifestEntry {
            file,
            label: s.label,
        });
    }
    let manifest = Manifest {
        provenance: dataset.provenance.clone(),
        files,
    };
    let path = root.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Read every `.pgm` under `normal/` and `anomaly/`, sorted by file name.
pub fn load_dataset(root: &Path) -> Result<LabeledDataset> {
    let mut samples = Vec::new();
    for label in Label::BOTH {
        let dir = root.join(label.name());
        let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut paths = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path
                .extension()
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
            {
                paths.push(path);
            }
        }
        paths.sort();
        for path in paths {
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            samples.push(Sample {
                name,
                label,
                image: load_pgm(&path)?,
            });
        }
    }
    if samples.is_empty() {
        return Err(Error::DegenerateData(format!(
            "no .pgm images under {}",
            root.display()
        )));
    }
    if let Some(first) = samples.first() {
        let dims = (first.image.width(), first.image.height());
        if let Some(odd) = samples
            .iter()
            .find(|s| (s.image.width(), s.image.height()) != dims)
        {
            return Err(Error::shape(format!(
                "{} is {}x{}, expected {}x{}",
                odd.name,
                odd.image.width(),
                odd.image.height(),
                dims.0,
                dims.1
            )));
        }
    }
    LabeledDataset::new(
        samples,
        Provenance::Directory {
            path: root.to_path_buf(),
        },
    )
}
