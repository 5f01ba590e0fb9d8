//! `qkernel`: generate data, inspect PCA and kernels, train, evaluate and run sweeps.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 on a data or
//! configuration error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qkernel::data::{load_dataset, save_dataset, stratified_split, synth_generate, LabeledDataset};
use qkernel::experiment::{
    concentration_csv, depth_csv, depth_report, load_source, preprocess, ConcentrationEntry,
    DatasetSource, Preprocess,
};
use qkernel::featuremaps::FeatureVector;
use qkernel::kernel::{concentration_probe, gram, GramOptions};
use qkernel::learn::{contribution_ratios, evaluate, pca_fit};
use qkernel::pipeline::{FeaturePipeline, TrainedModel};
use qkernel::{emit_report, run_experiment, Error, ExperimentConfig, KernelId, KernelMode};

type Result<T> = std::result::Result<T, Error>;

#[derive(Parser, Debug)]
#[command(
    name = "qkernel",
    version,
    about = "Quantum-kernel SVM experiments on small image sets"
)]
struct Cli {
    /// Master seed; overrides the seed in --config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment configuration JSON.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as PGM files plus manifest.json.
    GenData {
        #[arg(long)]
        normal: Option<usize>,
        #[arg(long)]
        anomaly: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        height: Option<usize>,
    },
    /// Downscale and/or binarize every image of a dataset directory.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        downscale: Option<usize>,
        #[arg(long)]
        binarize: Option<f64>,
    },
    /// Contribution ratio table of the leading principal components.
    PcaReport {
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 10)]
        components: usize,
    },
    /// Gram matrix of the training split as CSV.
    Kernel {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        kernel: KernelId,
        #[arg(long, default_value = "exact")]
        mode: KernelMode,
        #[arg(long, default_value_t = 3)]
        features: usize,
    },
    /// Fit features and an SVM on the training split; writes model.json and the held-out test images.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        kernel: KernelId,
        #[arg(long, default_value = "exact")]
        mode: KernelMode,
        #[arg(long, default_value_t = 3)]
        features: usize,
        #[command(flatten)]
        svm: SvmArgs,
    },
    /// Score a dataset directory with a saved model.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Run the configured kernel × feature-count sweep.
    Experiment {
        #[arg(long)]
        mode: Option<KernelMode>,
        #[arg(long)]
        repeats: Option<usize>,
        #[command(flatten)]
        svm: SvmArgs,
    },
    /// Gate count and depth of each feature-map circuit.
    DepthReport {
        #[arg(long, value_delimiter = ',', default_values_t = KernelId::QUANTUM.to_vec())]
        kernels: Vec<KernelId>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![4usize])]
        qubits: Vec<usize>,
    },
    /// Mean and variance of kernel values between random inputs by register size.
    ConcentrationProbe {
        #[arg(long, value_delimiter = ',', default_values_t = vec![KernelId::Qk9])]
        kernels: Vec<KernelId>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![2usize, 4, 6, 8])]
        qubits: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        pairs: usize,
    },
}

#[derive(Args, Debug)]
struct Source {
    /// Dataset directory; the configured synthetic dataset is used when absent.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SvmArgs {
    #[arg(long = "c")]
    c: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_passes: Option<usize>,
}

impl SvmArgs {
    fn apply(&self, config: &mut ExperimentConfig) {
        if let Some(c) = self.c {
            config.svm.c = c;
        }
        if let Some(tol) = self.tol {
            config.svm.tol = tol;
        }
        if let Some(m) = self.max_passes {
            config.svm.max_passes = m;
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn base_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn source_dataset(config: &mut ExperimentConfig, source: &Source) -> Result<LabeledDataset> {
    if let Some(dir) = &source.input {
        config.dataset = DatasetSource::Directory { path: dir.clone() };
    }
    load_source(config)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, text).map_err(io_err(path))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(&cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::GenData {
            normal,
            anomaly,
            width,
            height,
        } => {
            let mut synth = match &config.dataset {
                DatasetSource::Synthetic { config, .. } => config.clone(),
                DatasetSource::Directory { .. } => {
                    return Err(Error::Config(
                        "gen-data needs a synthetic dataset source".into(),
                    ))
                }
            };
            synth.normal_count = normal.unwrap_or(synth.normal_count);
            synth.anomaly_count = anomaly.unwrap_or(synth.anomaly_count);
            synth.width = width.unwrap_or(synth.width);
            synth.height = height.unwrap_or(synth.height);
            let ds = synth_generate(&synth, config.dataset_seed())?;
            save_dataset(&ds, out)?;
            println!(
                "wrote {} normal and {} anomaly images to {}",
                synth.normal_count,
                synth.anomaly_count,
                out.display()
            );
        }
        Command::Preprocess {
            input,
            downscale,
            binarize,
        } => {
            let ds = load_dataset(input)?;
            let pre = Preprocess {
                downscale: *downscale,
                binarize: *binarize,
            };
            if pre.downscale == Some(0) {
                return Err(Error::Config("downscale factor must be at least 1".into()));
            }
            let done = preprocess(&ds, &pre)?;
            save_dataset(&done, out)?;
            let img = &done.samples()[0].image;
            println!(
                "wrote {} images of {}x{} to {}",
                done.len(),
                img.width(),
                img.height(),
                out.display()
            );
        }
        Command::PcaReport { source, components } => {
            let ds = source_dataset(&mut config, source)?;
            let model = pca_fit(&ds.images(), *components)?;
            let (cr, ccr) = contribution_ratios(&model)?;
            let mut csv = String::from("component,cr,ccr\n");
            println!("{:>4} {:>8} {:>8}", "PC", "CR", "CCR");
            for (i, (a, b)) in cr.iter().zip(&ccr).enumerate() {
                csv.push_str(&format!("{},{a},{b}\n", i + 1));
                println!("{:>4} {a:>8.4} {b:>8.4}", i + 1);
            }
            write_file(&out.join("pca_report.csv"), &csv)?;
        }
        Command::Kernel {
            source,
            kernel,
            mode,
            features,
        } => {
            if !kernel.is_quantum() && !mode.is_exact() {
                return Err(Error::Argument(format!("{kernel} has no shot mode")));
            }
            let ds = source_dataset(&mut config, source)?;
            let (train, _) = stratified_split(
                &ds,
                config.train_per_class,
                config.test_per_class,
                config.seed,
            )?;
            let pipeline = FeaturePipeline::fit(&train.images(), *features)?;
            let angles: Vec<FeatureVector> = pipeline.angles_all(&train.images())?;
            let gamma = if kernel.is_quantum() {
                None
            } else {
                Some(qkernel::kernel::default_gamma(&angles)?)
            };
            let options = GramOptions {
                mode: *mode,
                seed: config.seed,
                gamma,
            };
            let g = gram(*kernel, &angles, &angles, &options)?;
            write_file(&out.join(format!("gram_{kernel}.csv")), &g.to_csv())?;
        }
        Command::Train {
            source,
            kernel,
            mode,
            features,
            svm,
        } => {
            if !kernel.is_quantum() && !mode.is_exact() {
                return Err(Error::Argument(format!("{kernel} has no shot mode")));
            }
            svm.apply(&mut config);
            let ds = source_dataset(&mut config, source)?;
            let (train, test) = stratified_split(
                &ds,
                config.train_per_class,
                config.test_per_class,
                config.seed,
            )?;
            let model = TrainedModel::fit(
                *kernel,
                *mode,
                &train.images(),
                &train.labels(),
                *features,
                &config.svm.params(config.seed),
                config.seed,
            )?;
            write_file(&out.join("model.json"), &to_json(&model))?;
            save_dataset(&test, &out.join("test"))?;
            println!(
                "trained {kernel} on {} samples ({} support vectors); held-out images in {}",
                train.len(),
                model.classifier.svm.support_indices.len(),
                out.join("test").display()
            );
        }
        Command::Evaluate { model, input } => {
            let text = fs::read_to_string(model).map_err(io_err(model))?;
            let model: TrainedModel =
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    path: model.clone(),
                    source,
                })?;
            let ds = load_dataset(input)?;
            let scores = model.scores(&ds.images())?;
            let report = evaluate(&scores, &ds.labels())?;
            write_file(&out.join("eval.json"), &report.to_json())?;
            write_file(&out.join("roc.csv"), &report.roc_csv())?;
            println!(
                "F1 {:.4}  AUC {:.4}  (TP {} FP {} TN {} FN {})",
                report.f1, report.auc, report.tp, report.fp, report.tn, report.fn_
            );
        }
        Command::Experiment { mode, repeats, svm } => {
            if let Some(m) = mode {
                config.mode = *m;
            }
            if let Some(r) = repeats {
                config.repeats = *r;
            }
            svm.apply(&mut config);
            let report = run_experiment(&config)?;
            for path in emit_report(&report, out)? {
                println!("wrote {}", path.display());
            }
            for a in &report.aggregates {
                println!(
                    "{:>4} k={:<2} F1 {:.3} [{:.3}, {:.3}]  AUC {:.3}",
                    a.kernel.to_string(),
                    a.features,
                    a.f1_mean,
                    a.f1_min,
                    a.f1_max,
                    a.auc_mean
                );
            }
        }
        Command::DepthReport { kernels, qubits } => {
            let rows = depth_report(kernels, qubits)?;
            let csv = depth_csv(&rows);
            print!("{csv}");
            write_file(&out.join("depth_report.csv"), &csv)?;
        }
        Command::ConcentrationProbe {
            kernels,
            qubits,
            pairs,
        } => {
            let entries = kernels
                .iter()
                .map(|&kernel| {
                    Ok(ConcentrationEntry {
                        kernel,
                        rows: concentration_probe(kernel, qubits, *pairs, config.seed)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let csv = concentration_csv(&entries);
            print!("{csv}");
            write_file(&out.join("concentration.csv"), &csv)?;
        }
    }
    Ok(())
}
