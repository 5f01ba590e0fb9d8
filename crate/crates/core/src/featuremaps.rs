//! Data-encoding circuits for the QK0–QK10 kernel family.
//!
//! One qubit per feature; qubit `i` carries principal component `i + 1`.
//! Features are min-max scaled into rotation angles in `[0, π]` before
//! encoding (see [`AngleScaler`]).

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate};
use crate::error::{Error, Result};

/// A finite, non-empty real feature vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::argument(
                "feature vector must have at least one entry",
            ));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::argument(format!(
                "feature {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// First `k` entries.
    pub fn truncated(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.0.len() {
            return Err(Error::shape(format!(
                "cannot keep {k} of {} features",
                self.0.len()
            )));
        }
        Ok(Self(self.0[..k].to_vec()))
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FeatureVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<FeatureVector> for Vec<f64> {
    fn from(v: FeatureVector) -> Self {
        v.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelId {
    Qk0,
    Qk1,
    Qk2,
    Qk3,
    Qk4,
    Qk5,
    Qk6,
    Qk7,
    Qk8,
    Qk9,
    Qk10,
    Rbf,
}

impl KernelId {
    pub const QUANTUM: [KernelId; 11] = [
        KernelId::Qk0,
        KernelId::Qk1,
        KernelId::Qk2,
        KernelId::Qk3,
        KernelId::Qk4,
        KernelId::Qk5,
        KernelId::Qk6,
        KernelId::Qk7,
        KernelId::Qk8,
        KernelId::Qk9,
        KernelId::Qk10,
    ];

    pub const ALL: [KernelId; 12] = [
        KernelId::Qk0,
        KernelId::Qk1,
        KernelId::Qk2,
        KernelId::Qk3,
        KernelId::Qk4,
        KernelId::Qk5,
        KernelId::Qk6,
        KernelId::Qk7,
        KernelId::Qk8,
        KernelId::Qk9,
        KernelId::Qk10,
        KernelId::Rbf,
    ];

    pub fn is_quantum(self) -> bool {
        self != KernelId::Rbf
    }

    pub fn tag(self) -> &'static str {
        match self {
            KernelId::Qk0 => "QK0",
            KernelId::Qk1 => "QK1",
            KernelId::Qk2 => "QK2",
            KernelId::Qk3 => "QK3",
            KernelId::Qk4 => "QK4",
            KernelId::Qk5 => "QK5",
            KernelId::Qk6 => "QK6",
            KernelId::Qk7 => "QK7",
            KernelId::Qk8 => "QK8",
            KernelId::Qk9 => "QK9",
            KernelId::Qk10 => "QK10",
            KernelId::Rbf => "RBF",
        }
    }

    /// Smallest register the circuit topology supports.
    pub fn min_qubits(self) -> Option<usize> {
        match self {
            KernelId::Qk0 | KernelId::Qk1 => Some(1),
            KernelId::Rbf => None,
            _ => Some(2),
        }
    }

    /// Number of gates in the `n`-qubit feature map; `None` for RBF.
    pub fn gate_count(self, n: usize) -> Option<usize> {
        let n = n as isize;
        let count = match self {
            KernelId::Qk0 => n,
            KernelId::Qk1 => 2 * n,
            KernelId::Qk2 | KernelId::Qk3 | KernelId::Qk4 => 3 * n - 1,
            KernelId::Qk5 | KernelId::Qk6 | KernelId::Qk7 | KernelId::Qk8 => 4 * n - 2,
            KernelId::Qk9 | KernelId::Qk10 => 5 * n - 2,
            KernelId::Rbf => return None,
        };
        Some(count.max(0) as usize)
    }

    fn gate_count_formula(self) -> Option<&'static str> {
        match self {
            KernelId::Qk0 => Some("n"),
            KernelId::Qk1 => Some("2n"),
            KernelId::Qk2 | KernelId::Qk3 | KernelId::Qk4 => Some("3n - 1"),
            KernelId::Qk5 | KernelId::Qk6 | KernelId::Qk7 | KernelId::Qk8 => Some("4n - 2"),
            KernelId::Qk9 | KernelId::Qk10 => Some("5n - 2"),
            KernelId::Rbf => None,
        }
    }
}

impl fmt::Display for KernelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for KernelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        KernelId::ALL
            .into_iter()
            .find(|k| k.tag() == upper)
            .ok_or_else(|| {
                Error::argument(format!("unknown kernel '{s}' (expected QK0..QK10 or RBF)"))
            })
    }
}

impl TryFrom<String> for KernelId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelId> for String {
    fn from(k: KernelId) -> Self {
        k.tag().to_string()
    }
}

/// Per-feature min-max map onto rotation angles in `[0, π]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl AngleScaler {
    pub fn fit(training: &[FeatureVector]) -> Result<Self> {
        let first = training
            .first()
            .ok_or_else(|| Error::argument("cannot fit scaler on an empty training set"))?;
        let dim = first.len();
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for (row, x) in training.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::shape(format!(
                    "training vector {row} has {} features, expected {dim}",
                    x.len()
                )));
            }
            for (f, &v) in x.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::argument(format!("NaN in training vector {row}")));
                }
                min[f] = min[f].min(v);
                max[f] = max[f].max(v);
            }
        }
        Ok(Self { min, max })
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn transform(&self, x: &FeatureVector) -> Result<FeatureVector> {
        if x.len() != self.dim() {
            return Err(Error::shape(format!(
                "scaler fit on {} features, got {}",
                self.dim(),
                x.len()
            )));
        }
        let angles = x
            .iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&v, (&lo, &hi))| {
                let span = hi - lo;
                if span <= 0.0 {
                    FRAC_PI_2
                } else {
                    (PI * (v - lo) / span).clamp(0.0, PI)
                }
            })
            .collect();
        FeatureVector::new(angles)
    }
}

pub fn fit_scaler(training: &[FeatureVector]) -> Result<AngleScaler> {
    AngleScaler::fit(training)
}

pub fn scale(scaler: &AngleScaler, x: &FeatureVector) -> Result<FeatureVector> {
    scaler.transform(x)
}

/// Build `U_k(x)` for a quantum kernel tag from pre-scaled angles.
pub fn build_feature_map(kernel: KernelId, angles: &FeatureVector) -> Result<Circuit> {
    let min = kernel
        .min_qubits()
        .ok_or_else(|| Error::WrongFamily(kernel.to_string()))?;
    let n = angles.len();
    if n < min {
        return Err(Error::shape(format!(
            "{kernel} needs at least {min} qubits, got {n}"
        )));
    }
    let a = angles.values();
    let last = n - 1;
    let mut gates = Vec::with_capacity(kernel.gate_count(n).unwrap_or(0));

    let hadamard_ry_layer = |gates: &mut Vec<Gate>| {
        gates.extend((0..n).map(Gate::H));
        gates.extend((0..n).map(|q| Gate::Ry(q, a[q])));
    };

    match kernel {
        KernelId::Qk0 => gates.extend((0..n).map(|q| Gate::Ry(q, a[q]))),
        KernelId::Qk1 => hadamard_ry_layer(&mut gates),
        KernelId::Qk2 | KernelId::Qk3 => {
            hadamard_ry_layer(&mut gates);
            for i in 0..last {
                let (control, target, theta) = (i, i + 1, a[i + 1]);
                gates.push(if kernel == KernelId::Qk2 {
                    Gate::Cry {
                        control,
                        target,
                        theta,
                    }
                } else {
                    Gate::Crx {
                        control,
                        target,
                        theta,
                    }
                });
            }
        }
        KernelId::Qk4 | KernelId::Qk5 => {
            hadamard_ry_layer(&mut gates);
            for i in 0..last {
                gates.push(Gate::Cry {
                    control: i,
                    target: last,
                    theta: a[i],
                });
                if kernel == KernelId::Qk5 {
                    gates.push(Gate::Rz(last, a[i]));
                }
            }
        }
        KernelId::Qk6 => {
            hadamard_ry_layer(&mut gates);
            for i in 0..last {
                gates.push(Gate::Cnot {
                    control: i,
                    target: i + 1,
                });
                gates.push(Gate::Ry(i + 1, a[i + 1]));
            }
        }
        KernelId::Qk7 | KernelId::Qk8 | KernelId::Qk9 | KernelId::Qk10 => {
            hadamard_ry_layer(&mut gates);
            for i in 0..last {
                if kernel == KernelId::Qk10 && n > 2 {
                    let partner = if i + 1 < last { i + 1 } else { 0 };
                    gates.push(Gate::Ccx {
                        controls: [i, partner],
                        target: last,
                    });
                } else {
                    gates.push(Gate::Cnot {
                        control: i,
                        target: last,
                    });
                }
                gates.push(if kernel == KernelId::Qk8 {
                    Gate::Rz(last, a[i])
                } else {
                    Gate::Ry(last, a[i])
                });
            }
            if matches!(kernel, KernelId::Qk9 | KernelId::Qk10) {
                gates.extend((0..n).map(|q| Gate::Rz(q, a[q])));
            }
        }
        KernelId::Rbf => unreachable!("rejected above"),
    }

    Circuit::from_gates(n, gates)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub kernel: KernelId,
    pub quantum: bool,
    pub description: String,
    /// Gate count as a function of the number of qubits `n`.
    pub gate_count: Option<String>,
    pub min_qubits: Option<usize>,
    /// Where the construction commits to one reading of an ambiguous circuit description.
    pub interpretation: Option<String>,
}

pub fn kernel_catalog() -> Vec<CatalogEntry> {
    KernelId::ALL
        .into_iter()
        .map(|kernel| {
            let (description, interpretation): (&str, Option<&str>) = match kernel {
                KernelId::Qk0 => (
                    "RY(a_i) on every qubit",
                    Some("pure RY angle encoding; a Hadamard-only layer would make every kernel value 1"),
                ),
                KernelId::Qk1 => ("H then RY(a_i) on every qubit", None),
                KernelId::Qk2 => (
                    "QK1 layer, then staircase CRY(a_{i+1}) from qubit i to qubit i+1",
                    Some("each staircase gate uses the target qubit's feature"),
                ),
                KernelId::Qk3 => (
                    "QK1 layer, then staircase CRX(a_{i+1}) from qubit i to qubit i+1",
                    Some("each staircase gate uses the target qubit's feature"),
                ),
                KernelId::Qk4 => (
                    "QK1 layer, then CRY(a_i) from every qubit i to the last qubit",
                    Some("each fan-in gate uses the control qubit's feature"),
                ),
                KernelId::Qk5 => (
                    "QK4 with RZ(a_i) on the last qubit after each CRY",
                    Some("each fan-in gate uses the control qubit's feature"),
                ),
                KernelId::Qk6 => (
                    "QK1 layer, then staircase CNOT(i, i+1) each followed by RY(a_{i+1}) on qubit i+1",
                    None,
                ),
                KernelId::Qk7 => (
                    "QK1 layer, then CNOT(i, last) each followed by RY(a_i) on the last qubit",
                    None,
                ),
                KernelId::Qk8 => ("QK7 with RZ(a_i) in place of each RY on the last qubit", None),
                KernelId::Qk9 => ("QK7 followed by RZ(a_j) on every qubit", None),
                KernelId::Qk10 => (
                    "QK9 with each CNOT(i, last) replaced by CCX(i, i+1 or 0; last)",
                    Some("second Toffoli control is qubit i+1, wrapping to qubit 0; CNOT when n = 2"),
                ),
                KernelId::Rbf => ("classical radial basis function exp(-gamma |x - y|^2)", None),
            };
            CatalogEntry {
                kernel,
                quantum: kernel.is_quantum(),
                description: description.to_string(),
                gate_count: kernel.gate_count_formula().map(str::to_string),
                min_qubits: kernel.min_qubits(),
                interpretation: interpretation.map(str::to_string),
            }
        })
        .collect()
}

pub fn catalog_json() -> String {
    serde_json::to_string_pretty(&kernel_catalog()).expect("catalog serializes")
}
