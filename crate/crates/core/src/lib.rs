//! Quantum-kernel support vector machines on small image datasets.
//!
//! The pipeline runs images through preprocessing and PCA, encodes the
//! principal-component scores into one of eleven data-encoding circuits
//! (QK0–QK10), estimates fidelity kernels `|<φ(x)|φ(y)>|^2` on a dense
//! statevector simulator (exactly or from sampled shots), trains a C-SVM by
//! sequential minimal optimization on the precomputed Gram matrix and scores
//! the result with F1 and ROC-AUC.

pub mod circuit;
pub mod data;
pub mod error;
pub mod experiment;
pub mod featuremaps;
pub mod kernel;
pub mod learn;
pub mod pipeline;
pub mod seed;

pub use circuit::{Circuit, Gate, GateKind, QuantumState, ShotCounts};
pub use data::{GrayImage, Label, LabeledDataset, SynthConfig};
pub use error::{Error, Result};
pub use experiment::{emit_report, run_experiment, ExperimentConfig, RunReport};
pub use featuremaps::{AngleScaler, FeatureVector, KernelId};
pub use kernel::{GramMatrix, GramOptions, KernelEstimate, KernelMode};
pub use learn::{EvalReport, PcaModel, RocPoint, SvmModel, SvmParams};
