use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn qkernel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qkernel"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("cfg.json");
    fs::write(
        &path,
        r#"{
            "kernels": ["QK1", "QK9", "RBF"],
            "features": [3, 4],
            "seed": 11,
            "dataset": {"synthetic": {"config": {"width": 48, "height": 36}}}
        }"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qkernel(dir.path(), &["--help"])), 0);
    assert_eq!(code(&qkernel(dir.path(), &["--version"])), 0);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&qkernel(dir.path(), &["frobnicate"])), 1);
    assert_eq!(
        code(&qkernel(dir.path(), &["kernel", "--kernel", "QK42"])),
        1
    );
    assert_eq!(
        code(&qkernel(dir.path(), &["depth-report", "--qubits", "x"])),
        1
    );
}

#[test]
fn rbf_with_shots_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = qkernel(
        dir.path(),
        &["kernel", "--kernel", "RBF", "--mode", "shots"],
    );
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("RBF"));
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"kernels": []}"#).unwrap();
    let out = qkernel(
        dir.path(),
        &["experiment", "--config", cfg.to_str().unwrap()],
    );
    assert_eq!(code(&out), 2);
    let missing = qkernel(
        dir.path(),
        &["evaluate", "--model", "nope.json", "--input", "."],
    );
    assert_eq!(code(&missing), 2);
}

#[test]
fn experiment_writes_report_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = qkernel(
        dir.path(),
        &["experiment", "--config", &cfg, "--out", "run"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let run = dir.path().join("run");
    for name in [
        "report.json",
        "timings.json",
        "f1_vs_features.csv",
        "depth_report.csv",
        "roc_QK9_4.csv",
        "roc_RBF_3.csv",
    ] {
        assert!(run.join(name).is_file(), "missing {name}");
    }
    let f1 = fs::read_to_string(run.join("f1_vs_features.csv")).unwrap();
    assert_eq!(
        f1.lines().next(),
        Some("kernel,features,f1_min,f1_mean,f1_max")
    );
    assert_eq!(f1.lines().count(), 1 + 3 * 2);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let report = |seed: &str, out: &str| {
        let o = qkernel(
            dir.path(),
            &["experiment", "--config", &cfg, "--seed", seed, "--out", out],
        );
        assert_eq!(code(&o), 0);
        fs::read(dir.path().join(out).join("report.json")).unwrap()
    };
    let a = report("11", "a");
    let b = report("11", "b");
    let c = report("12", "c");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn pca_report_is_cumulative() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = qkernel(
        dir.path(),
        &[
            "pca-report",
            "--config",
            &cfg,
            "--components",
            "6",
            "--out",
            "pca",
        ],
    );
    assert_eq!(code(&out), 0);
    let csv = fs::read_to_string(dir.path().join("pca/pca_report.csv")).unwrap();
    let rows: Vec<(f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 6);
    let mut total = 0.0;
    for (i, &(cr, ccr)) in rows.iter().enumerate() {
        total += cr;
        assert!((ccr - total).abs() < 1e-12);
        if i > 0 {
            assert!(cr <= rows[i - 1].0 + 1e-12);
        }
    }
    assert!(total <= 1.0 + 1e-12);
}

#[test]
fn generate_train_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = qkernel(
        d,
        &[
            "gen-data", "--width", "48", "--height", "36", "--out", "data",
        ],
    );
    assert_eq!(code(&gen), 0);
    assert_eq!(fs::read_dir(d.join("data/normal")).unwrap().count(), 33);
    assert_eq!(fs::read_dir(d.join("data/anomaly")).unwrap().count(), 33);

    let train = qkernel(
        d,
        &[
            "train",
            "--input",
            "data",
            "--kernel",
            "qk1",
            "--features",
            "3",
            "--out",
            "model",
        ],
    );
    assert_eq!(
        code(&train),
        0,
        "{}",
        String::from_utf8_lossy(&train.stderr)
    );
    assert_eq!(
        fs::read_dir(d.join("model/test/normal")).unwrap().count(),
        9
    );

    let eval = qkernel(
        d,
        &[
            "evaluate",
            "--model",
            "model/model.json",
            "--input",
            "model/test",
            "--out",
            "eval",
        ],
    );
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("eval/eval.json")).unwrap()).unwrap();
    let cells = ["tp", "fp", "tn", "fn"].map(|k| report[k].as_u64().unwrap());
    assert_eq!(cells.iter().sum::<u64>(), 18);
    let roc = fs::read_to_string(d.join("eval/roc.csv")).unwrap();
    assert_eq!(roc.lines().next(), Some("FPR,TPR"));
}

#[test]
fn preprocess_shrinks_images() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let gen = qkernel(
        d,
        &[
            "gen-data",
            "--normal",
            "3",
            "--anomaly",
            "2",
            "--width",
            "20",
            "--height",
            "10",
            "--out",
            "raw",
        ],
    );
    assert_eq!(code(&gen), 0);
    let pre = qkernel(
        d,
        &[
            "preprocess",
            "--input",
            "raw",
            "--downscale",
            "3",
            "--binarize",
            "0.5",
            "--out",
            "pre",
        ],
    );
    assert_eq!(code(&pre), 0, "{}", String::from_utf8_lossy(&pre.stderr));
    let ds = qkernel::data::load_dataset(&d.join("pre")).unwrap();
    assert_eq!(ds.len(), 5);
    for s in ds.samples() {
        assert_eq!((s.image.width(), s.image.height()), (7, 4));
        assert!(s.image.pixels().iter().all(|&p| p == 0.0 || p == 1.0));
    }
}

#[test]
fn depth_and_concentration_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let depth = qkernel(
        d,
        &[
            "depth-report",
            "--kernels",
            "QK9,QK10",
            "--qubits",
            "4",
            "--out",
            "o",
        ],
    );
    assert_eq!(code(&depth), 0);
    let csv = fs::read_to_string(d.join("o/depth_report.csv")).unwrap();
    assert!(csv.contains("QK9,4,18,9,9"));
    assert!(csv.contains("QK10,4,18,9,36"));

    let conc = qkernel(
        d,
        &[
            "concentration-probe",
            "--qubits",
            "2,6",
            "--pairs",
            "100",
            "--out",
            "o",
        ],
    );
    assert_eq!(code(&conc), 0);
    let csv = fs::read_to_string(d.join("o/concentration.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
