//! Kernel evaluation and Gram-matrix assembly.
//!
//! Quantum kernels are fidelities `|<φ(x_i)|φ(x_j)>|^2`. They can be computed
//! directly from two simulated statevectors, or estimated the way hardware
//! would: run `U(x_i)† U(x_j)` on `|0...0>` and count how often every qubit
//! reads 0.

use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::QuantumState;
use crate::error::{Error, Result};
use crate::featuremaps::{build_feature_map, FeatureVector, KernelId};
use crate::seed;

/// Shot count used when shot mode is requested without an explicit count.
pub const DEFAULT_SHOTS: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelMode {
    #[default]
    Exact,
    Shots(u64),
}

impl KernelMode {
    pub fn shots(self) -> Option<u64> {
        match self {
            KernelMode::Exact => None,
            KernelMode::Shots(s) => Some(s),
        }
    }

    pub fn is_exact(self) -> bool {
        self == KernelMode::Exact
    }
}

impl fmt::Display for KernelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelMode::Exact => f.write_str("exact"),
            KernelMode::Shots(s) => write!(f, "shots:{s}"),
        }
    }
}

impl FromStr for KernelMode {
    type Err = Error;

    /// Accepts `exact`, `shots` (default count) or `shots:<count>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.split_once(':') {
            None if s == "exact" => Ok(KernelMode::Exact),
            None if s == "shots" => Ok(KernelMode::Shots(DEFAULT_SHOTS)),
            Some(("shots", count)) => count
                .parse::<u64>()
                .ok()
                .filter(|&c| c > 0)
                .map(KernelMode::Shots)
                .ok_or_else(|| Error::argument(format!("invalid shot count '{count}'"))),
            _ => Err(Error::argument(format!(
                "unknown kernel mode '{s}' (expected exact, shots or shots:<count>)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEstimate {
    pub value: f64,
    pub shots: Option<u64>,
    /// Binomial standard error `sqrt(p(1-p)/shots)`; zero for exact values.
    pub stderr: f64,
}

fn check_pair(x_i: &FeatureVector, x_j: &FeatureVector) -> Result<()> {
    if x_i.len() != x_j.len() {
        return Err(Error::shape(format!(
            "feature vectors of length {} and {}",
            x_i.len(),
            x_j.len()
        )));
    }
    Ok(())
}

fn embed(kernel: KernelId, x: &FeatureVector) -> Result<QuantumState> {
    build_feature_map(kernel, x)?.run()
}

/// Exact fidelity from the statevector inner product.
pub fn fidelity_exact(
    kernel: KernelId,
    x_i: &FeatureVector,
    x_j: &FeatureVector,
) -> Result<KernelEstimate> {
    check_pair(x_i, x_j)?;
    let phi_i = embed(kernel, x_i)?;
    let phi_j = embed(kernel, x_j)?;
    Ok(KernelEstimate {
        value: phi_i.fidelity(&phi_j)?,
        shots: None,
        stderr: 0.0,
    })
}

/// Shot estimate: fraction of all-zeros outcomes after `U(x_i)† U(x_j) |0...0>`.
pub fn fidelity_shots(
    kernel: KernelId,
    x_i: &FeatureVector,
    x_j: &FeatureVector,
    shots: u64,
    seed: u64,
) -> Result<KernelEstimate> {
    check_pair(x_i, x_j)?;
    if shots == 0 {
        return Err(Error::argument("shots must be at least 1"));
    }
    let u_i = build_feature_map(kernel, x_i)?;
    let u_j = build_feature_map(kernel, x_j)?;
    let state = u_j.compose(&u_i.adjoint())?.run()?;
    let zeros = state.sample_indices(shots, seed)?[0];
    let p = zeros as f64 / shots as f64;
    Ok(KernelEstimate {
        value: p,
        shots: Some(shots),
        stderr: (p * (1.0 - p) / shots as f64).sqrt(),
    })
}

pub fn rbf(x_i: &FeatureVector, x_j: &FeatureVector, gamma: f64) -> Result<f64> {
    check_pair(x_i, x_j)?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::argument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let d2: f64 = x_i
        .iter()
        .zip(x_j.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((-gamma * d2).exp())
}

/// `1 / (n_features * mean population variance)`, or 1.0 for constant data.
pub fn default_gamma(training: &[FeatureVector]) -> Result<f64> {
    let first = training
        .first()
        .ok_or_else(|| Error::argument("cannot derive gamma from an empty training set"))?;
    let dim = first.len();
    if training.iter().any(|x| x.len() != dim) {
        return Err(Error::shape("training vectors differ in length"));
    }
    let m = training.len() as f64;
    let mean_variance = (0..dim)
        .map(|f| {
            let mean = training.iter().map(|x| x[f]).sum::<f64>() / m;
            training.iter().map(|x| (x[f] - mean).powi(2)).sum::<f64>() / m
        })
        .sum::<f64>()
        / dim as f64;
    if mean_variance > 0.0 {
        Ok(1.0 / (dim as f64 * mean_variance))
    } else {
        Ok(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramOptions {
    pub mode: KernelMode,
    pub seed: u64,
    /// Required for RBF, ignored otherwise.
    pub gamma: Option<f64>,
}

impl GramOptions {
    pub fn exact() -> Self {
        Self {
            mode: KernelMode::Exact,
            seed: 0,
            gamma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramMatrix {
    pub kernel: KernelId,
    pub mode: KernelMode,
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries.
    pub values: Vec<f64>,
}

impl GramMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.values)
    }

    /// Largest `|G_ij - G_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the symmetrized matrix.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::shape(format!(
                "eigenvalues of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        if self.rows == 0 {
            return Ok(0.0);
        }
        let m = self.to_matrix();
        let sym = (&m + m.transpose()) * 0.5;
        Ok(SymmetricEigen::new(sym).eigenvalues.min())
    }

    /// CSV: a metadata header (`kernel,mode,shots,rows,cols`), its values, then one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kernel,mode,shots,rows,cols\n");
        let (mode, shots) = match self.mode {
            KernelMode::Exact => ("exact", 0),
            KernelMode::Shots(s) => ("shots", s),
        };
        out.push_str(&format!(
            "{},{mode},{shots},{},{}\n",
            self.kernel, self.rows, self.cols
        ));
        for i in 0..self.rows {
            let line: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut start = 0;
        let numbered: Vec<(usize, &str)> = text
            .split_inclusive('\n')
            .map(|l| {
                let at = start;
                start += l.len();
                (at, l.trim())
            })
            .collect();
        let offset = text.len();
        let mut lines = numbered.into_iter();
        let parse_err = |offset: usize, message: String| Error::Parse { offset, message };

        let (at, header) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty Gram CSV".into()))?;
        if header != "kernel,mode,shots,rows,cols" {
            return Err(parse_err(at, format!("unexpected header '{header}'")));
        }
        let (at, meta) = lines
            .next()
            .ok_or_else(|| parse_err(offset, "missing metadata line".into()))?;
        let fields: Vec<&str> = meta.split(',').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                at,
                format!("metadata needs 5 fields, got {}", fields.len()),
            ));
        }
        let kernel: KernelId = fields[0]
            .parse()
            .map_err(|e: Error| parse_err(at, e.to_string()))?;
        let num = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| parse_err(at, format!("invalid integer '{s}'")))
        };
        let mode = match fields[1] {
            "exact" => KernelMode::Exact,
            "shots" => KernelMode::Shots(num(fields[2])?),
            other => return Err(parse_err(at, format!("unknown mode '{other}'"))),
        };
        let rows = num(fields[3])? as usize;
        let cols = num(fields[4])? as usize;

        let mut values = Vec::with_capacity(rows * cols);
        for (at, line) in lines.by_ref().take(rows) {
            let before = values.len();
            for cell in line.split(',') {
                values.push(
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| parse_err(at, format!("invalid number '{cell}'")))?,
                );
            }
            if values.len() - before != cols {
                return Err(parse_err(
                    at,
                    format!("expected {cols} values, got {}", values.len() - before),
                ));
            }
        }
        if values.len() != rows * cols {
            return Err(parse_err(offset, format!("expected {rows} data rows")));
        }
        Ok(Self {
            kernel,
            mode,
            rows,
            cols,
            values,
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_csv().as_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

fn check_lengths(rows: &[FeatureVector], cols: &[FeatureVector]) -> Result<()> {
    let mut lens = rows.iter().chain(cols).map(|x| x.len());
    if let Some(first) = lens.next() {
        if lens.any(|l| l != first) {
            return Err(Error::shape(
                "Gram inputs have inconsistent feature lengths",
            ));
        }
    }
    Ok(())
}

/// Assemble the kernel matrix between `rows` and `cols`.
///
/// When `rows == cols` only the upper triangle is evaluated and mirrored, so the
/// result is exactly symmetric in both modes. Shot entries use seeds derived
/// from `(options.seed, i, j)`.
pub fn gram(
    kernel: KernelId,
    rows: &[FeatureVector],
    cols: &[FeatureVector],
    options: &GramOptions,
) -> Result<GramMatrix> {
    check_lengths(rows, cols)?;
    let symmetric = rows == cols;
    let (r, c) = (rows.len(), cols.len());

    let entry: Box<dyn Fn(usize, usize) -> Result<f64> + Sync> = match (kernel, options.mode) {
        (KernelId::Rbf, KernelMode::Shots(_)) => {
            return Err(Error::argument("the RBF kernel has no shot mode"));
        }
        (KernelId::Rbf, KernelMode::Exact) => {
            let gamma = options
                .gamma
                .ok_or_else(|| Error::argument("RBF Gram matrix requires gamma"))?;
            Box::new(move |i, j| rbf(&rows[i], &cols[j], gamma))
        }
        (_, KernelMode::Exact) => {
            let embed_all = |xs: &[FeatureVector]| -> Result<Vec<QuantumState>> {
                xs.par_iter().map(|x| embed(kernel, x)).collect()
            };
            let row_states = embed_all(rows)?;
            let col_states = if symmetric {
                row_states.clone()
            } else {
                embed_all(cols)?
            };
            Box::new(move |i, j| row_states[i].fidelity(&col_states[j]))
        }
        (_, KernelMode::Shots(shots)) => {
            let base = options.seed;
            Box::new(move |i, j| {
                let entry_seed = seed::derive(base, &[i as u64, j as u64]);
                Ok(fidelity_shots(kernel, &rows[i], &cols[j], shots, entry_seed)?.value)
            })
        }
    };

    let computed: Vec<Vec<f64>> = (0..r)
        .into_par_iter()
        .map(|i| {
            let start = if symmetric { i } else { 0 };
            (start..c).map(|j| entry(i, j)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut values = vec![0.0; r * c];
    for (i, row) in computed.into_iter().enumerate() {
        let start = if symmetric { i } else { 0 };
        for (offset, v) in row.into_iter().enumerate() {
            let j = start + offset;
            values[i * c + j] = v;
            if symmetric {
                values[j * c + i] = v;
            }
        }
    }
    Ok(GramMatrix {
        kernel,
        mode: options.mode,
        rows: r,
        cols: c,
        values,
    })
}

/// Nearest positive-semidefinite matrix by eigenvalue clipping. Exact-mode
/// matrices pass through untouched.
pub fn psd_clip(g: &GramMatrix) -> Result<GramMatrix> {
    if !g.is_square() {
        return Err(Error::shape(format!(
            "psd_clip needs a square matrix, got {}x{}",
            g.rows, g.cols
        )));
    }
    if g.mode.is_exact() {
        return Ok(g.clone());
    }
    Ok(GramMatrix {
        values: clip_negative_spectrum(&g.values, g.rows),
        ..g.clone()
    })
}

pub(crate) fn clip_negative_spectrum(values: &[f64], n: usize) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let m = DMatrix::from_row_slice(n, n, values);
    let sym = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
    rebuilt.transpose().as_slice().to_vec()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub n_qubits: usize,
    pub pairs: usize,
    pub mean: f64,
    pub variance: f64,
}

/// Mean and variance of off-diagonal kernel values for random angle pairs
/// drawn uniformly from `[0, π]^n`, one row per register size.
pub fn concentration_probe(
    kernel: KernelId,
    n_qubits: &[usize],
    pairs: usize,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if n_qubits.is_empty() {
        return Err(Error::argument(
            "concentration probe needs at least one register size",
        ));
    }
    if pairs < 2 {
        return Err(Error::argument(
            "concentration probe needs at least 2 pairs",
        ));
    }
    if !kernel.is_quantum() {
        return Err(Error::WrongFamily(kernel.to_string()));
    }
    n_qubits
        .iter()
        .map(|&n| {
            let mut rng = seed::rng(seed::derive(seed, &[n as u64]));
            let mut draw = move || -> Result<(FeatureVector, FeatureVector)> {
                let mut v = || {
                    FeatureVector::new(
                        (0..n)
                            .map(|_| rng.random_range(0.0..=std::f64::consts::PI))
                            .collect(),
                    )
                };
                Ok((v()?, v()?))
            };
            let samples: Vec<_> = (0..pairs).map(|_| draw()).collect::<Result<_>>()?;
            probe_row(kernel, n, &samples)
        })
        .collect()
}

fn probe_row(
    kernel: KernelId,
    n: usize,
    samples: &[(FeatureVector, FeatureVector)],
) -> Result<ConcentrationRow> {
    let values: Vec<f64> = samples
        .par_iter()
        .map(|(x, y)| fidelity_exact(kernel, x, y).map(|e| e.value))
        .collect::<Result<_>>()?;
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
    Ok(ConcentrationRow {
        n_qubits: n,
        pairs: samples.len(),
        mean,
        variance,
    })
}
