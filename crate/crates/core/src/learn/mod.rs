//! Feature extraction, classifier training and evaluation.

mod metrics;
mod pca;
mod svm;

pub use metrics::{evaluate, EvalReport, RocPoint};
pub use pca::{contribution_ratios, cumulative_contribution, pca_fit, pca_transform, PcaModel};
pub use svm::{dual_objective, svm_decision, svm_train_smo, train_smo, SvmModel, SvmParams};
