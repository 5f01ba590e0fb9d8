//! Dense statevector simulation.
//!
//! Basis-state indices put qubit 0 in the most significant bit, so the
//! amplitude of `|q0 q1 ... q(n-1)>` lives at index `q0 * 2^(n-1) + ... + q(n-1)`.
//! Rotations follow the `exp(-i θ G / 2)` convention.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};
use std::fmt;

use num_complex::Complex64;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Largest register the dense simulator accepts.
pub const MAX_QUBITS: usize = 20;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

type Matrix2 = [[Complex64; 2]; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    H(usize),
    Rx(usize, f64),
    Ry(usize, f64),
    Rz(usize, f64),
    Crx {
        control: usize,
        target: usize,
        theta: f64,
    },
    Cry {
        control: usize,
        target: usize,
        theta: f64,
    },
    Crz {
        control: usize,
        target: usize,
        theta: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Ccx {
        controls: [usize; 2],
        target: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
    Crx,
    Cry,
    Crz,
    Cnot,
    Ccx,
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::Rx(..) => GateKind::Rx,
            Gate::Ry(..) => GateKind::Ry,
            Gate::Rz(..) => GateKind::Rz,
            Gate::Crx { .. } => GateKind::Crx,
            Gate::Cry { .. } => GateKind::Cry,
            Gate::Crz { .. } => GateKind::Crz,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Ccx { .. } => GateKind::Ccx,
        }
    }

    /// Qubits touched by the gate, controls first and target last.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::H(q) | Gate::Rx(q, _) | Gate::Ry(q, _) | Gate::Rz(q, _) => vec![q],
            Gate::Crx {
                control, target, ..
            }
            | Gate::Cry {
                control, target, ..
            }
            | Gate::Crz {
                control, target, ..
            }
            | Gate::Cnot { control, target } => vec![control, target],
            Gate::Ccx { controls, target } => vec![controls[0], controls[1], target],
        }
    }

    pub fn angle(&self) -> Option<f64> {
        match *self {
            Gate::Rx(_, t) | Gate::Ry(_, t) | Gate::Rz(_, t) => Some(t),
            Gate::Crx { theta, .. } | Gate::Cry { theta, .. } | Gate::Crz { theta, .. } => {
                Some(theta)
            }
            Gate::H(_) | Gate::Cnot { .. } | Gate::Ccx { .. } => None,
        }
    }

    /// The inverse gate: rotations negate their angle, H/CNOT/CCX are self-inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rx(q, t) => Gate::Rx(q, -t),
            Gate::Ry(q, t) => Gate::Ry(q, -t),
            Gate::Rz(q, t) => Gate::Rz(q, -t),
            Gate::Crx {
                control,
                target,
                theta,
            } => Gate::Crx {
                control,
                target,
                theta: -theta,
            },
            Gate::Cry {
                control,
                target,
                theta,
            } => Gate::Cry {
                control,
                target,
                theta: -theta,
            },
            Gate::Crz {
                control,
                target,
                theta,
            } => Gate::Crz {
                control,
                target,
                theta: -theta,
            },
            g @ (Gate::H(_) | Gate::Cnot { .. } | Gate::Ccx { .. }) => g,
        }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let qubits = self.qubits();
        for (k, &q) in qubits.iter().enumerate() {
            if q >= n_qubits {
                return Err(Error::Index { index: q, n_qubits });
            }
            if qubits[..k].contains(&q) {
                return Err(Error::argument(format!("gate {self} repeats qubit {q}")));
            }
        }
        Ok(())
    }

    /// Controls, target and the 2x2 unitary applied to the target.
    fn action(&self) -> (Vec<usize>, usize, Matrix2) {
        match *self {
            Gate::H(q) => (vec![], q, hadamard()),
            Gate::Rx(q, t) => (vec![], q, rx(t)),
            Gate::Ry(q, t) => (vec![], q, ry(t)),
            Gate::Rz(q, t) => (vec![], q, rz(t)),
            Gate::Crx {
                control,
                target,
                theta,
            } => (vec![control], target, rx(theta)),
            Gate::Cry {
                control,
                target,
                theta,
            } => (vec![control], target, ry(theta)),
            Gate::Crz {
                control,
                target,
                theta,
            } => (vec![control], target, rz(theta)),
            Gate::Cnot { control, target } => (vec![control], target, pauli_x()),
            Gate::Ccx { controls, target } => (controls.to_vec(), target, pauli_x()),
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gate::H(q) => write!(f, "H q{q}"),
            Gate::Rx(q, t) => write!(f, "RX({t}) q{q}"),
            Gate::Ry(q, t) => write!(f, "RY({t}) q{q}"),
            Gate::Rz(q, t) => write!(f, "RZ({t}) q{q}"),
            Gate::Crx {
                control,
                target,
                theta,
            } => write!(f, "CRX({theta}) q{control},q{target}"),
            Gate::Cry {
                control,
                target,
                theta,
            } => write!(f, "CRY({theta}) q{control},q{target}"),
            Gate::Crz {
                control,
                target,
                theta,
            } => write!(f, "CRZ({theta}) q{control},q{target}"),
            Gate::Cnot { control, target } => write!(f, "CNOT q{control},q{target}"),
            Gate::Ccx { controls, target } => {
                write!(f, "CCX q{},q{},q{target}", controls[0], controls[1])
            }
        }
    }
}

fn hadamard() -> Matrix2 {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    [[h, h], [h, -h]]
}

fn pauli_x() -> Matrix2 {
    [[ZERO, ONE], [ONE, ZERO]]
}

fn rx(theta: f64) -> Matrix2 {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(theta / 2.0).sin());
    [[c, s], [s, c]]
}

fn ry(theta: f64) -> Matrix2 {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

fn rz(theta: f64) -> Matrix2 {
    [
        [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
        [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
    ]
}

fn bit(n_qubits: usize, qubit: usize) -> usize {
    1 << (n_qubits - 1 - qubit)
}

fn check_register(n_qubits: usize) -> Result<()> {
    if (1..=MAX_QUBITS).contains(&n_qubits) {
        Ok(())
    } else {
        Err(Error::Size(n_qubits))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// `|0...0>` on `n_qubits` qubits.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Wrap raw amplitudes. The length must be a power of two; normalization is the caller's job.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() {
            return Err(Error::shape(format!(
                "{len} amplitudes is not a power of two"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_register(n_qubits)?;
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn prob_all_zero(&self) -> f64 {
        self.amplitudes[0].norm_sqr().min(1.0)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Result<Complex64> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::shape(format!(
                "inner product of {}-qubit and {}-qubit states",
                self.n_qubits, other.n_qubits
            )));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &QuantumState) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        let (controls, target, m) = gate.action();
        let n = self.n_qubits;
        let tbit = bit(n, target);
        let cmask = controls.iter().fold(0, |acc, &c| acc | bit(n, c));
        for i in 0..self.amplitudes.len() {
            if i & tbit != 0 || i & cmask != cmask {
                continue;
            }
            let j = i | tbit;
            let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
            self.amplitudes[i] = m[0][0] * a + m[0][1] * b;
            self.amplitudes[j] = m[1][0] * a + m[1][1] * b;
        }
        Ok(())
    }

    /// Bitstring for a basis index, qubit 0 first.
    pub fn bitstring(&self, index: usize) -> String {
        format!("{:0width$b}", index, width = self.n_qubits)
    }

    pub fn sample(&self, shots: u64, seed: u64) -> Result<ShotCounts> {
        let per_index = self.sample_indices(shots, seed)?;
        let counts = per_index
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (self.bitstring(i), c))
            .collect();
        Ok(ShotCounts { shots, counts })
    }

    /// Shot histogram indexed by basis state.
    pub(crate) fn sample_indices(&self, shots: u64, seed: u64) -> Result<Vec<u64>> {
        if shots == 0 {
            return Err(Error::argument("shots must be at least 1"));
        }
        let mut cumulative = Vec::with_capacity(self.amplitudes.len());
        let mut total = 0.0;
        for a in &self.amplitudes {
            total += a.norm_sqr();
            cumulative.push(total);
        }
        let mut rng = seed::rng(seed);
        let mut counts = vec![0u64; self.amplitudes.len()];
        let last = counts.len() - 1;
        for _ in 0..shots {
            let u = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(last);
            counts[idx] += 1;
        }
        Ok(counts)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: u64,
    pub counts: BTreeMap<String, u64>,
}

impl ShotCounts {
    pub fn count(&self, bitstring: &str) -> u64 {
        self.counts.get(bitstring).copied().unwrap_or(0)
    }

    pub fn frequency(&self, bitstring: &str) -> f64 {
        self.count(bitstring) as f64 / self.shots as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut circuit = Self::new(n_qubits)?;
        for g in gates {
            circuit.push(g)?;
        }
        Ok(circuit)
    }

    pub fn push(&mut self, gate: Gate) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(gate);
        Ok(self)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    /// Run on `|0...0>`.
    pub fn run(&self) -> Result<QuantumState> {
        let mut state = QuantumState::zero(self.n_qubits)?;
        self.apply_to(&mut state)?;
        Ok(state)
    }

    pub fn apply_to(&self, state: &mut QuantumState) -> Result<()> {
        if state.n_qubits != self.n_qubits {
            return Err(Error::shape(format!(
                "{}-qubit circuit applied to {}-qubit state",
                self.n_qubits, state.n_qubits
            )));
        }
        self.gates.iter().try_for_each(|g| state.apply(g))
    }

    /// Reversed gate order with every gate inverted.
    pub fn adjoint(&self) -> Circuit {
        Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().rev().map(Gate::inverse).collect(),
        }
    }

    /// `self` followed by `next`.
    pub fn compose(&self, next: &Circuit) -> Result<Circuit> {
        if self.n_qubits != next.n_qubits {
            return Err(Error::shape(format!(
                "cannot compose {}-qubit and {}-qubit circuits",
                self.n_qubits, next.n_qubits
            )));
        }
        let mut gates = self.gates.clone();
        gates.extend_from_slice(&next.gates);
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates,
        })
    }

    /// Greedy ASAP layering: each gate lands one layer after the latest layer
    /// already occupying any of its qubits.
    pub fn logical_depth(&self) -> usize {
        let mut level = vec![0usize; self.n_qubits];
        let mut depth = 0;
        for gate in &self.gates {
            let qubits = gate.qubits();
            let layer = qubits.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
            for q in qubits {
                level[q] = layer;
            }
            depth = depth.max(layer);
        }
        depth
    }

    /// Rewrite into the {H, RX, RY, RZ, CNOT} basis. Equal to the original up to global phase.
    pub fn decompose(&self) -> Circuit {
        let mut gates = Vec::with_capacity(self.gates.len() * 4);
        for gate in &self.gates {
            decompose_gate(gate, &mut gates);
        }
        Circuit {
            n_qubits: self.n_qubits,
            gates,
        }
    }

    pub fn decomposed_depth(&self) -> usize {
        self.decompose().logical_depth()
    }
}

fn decompose_gate(gate: &Gate, out: &mut Vec<Gate>) {
    match *gate {
        Gate::Cry {
            control,
            target,
            theta,
        } => out.extend([
            Gate::Ry(target, theta / 2.0),
            Gate::Cnot { control, target },
            Gate::Ry(target, -theta / 2.0),
            Gate::Cnot { control, target },
        ]),
        Gate::Crz {
            control,
            target,
            theta,
        } => out.extend([
            Gate::Rz(target, theta / 2.0),
            Gate::Cnot { control, target },
            Gate::Rz(target, -theta / 2.0),
            Gate::Cnot { control, target },
        ]),
        // RX = H RZ H on the target, and H commutes with the control.
        Gate::Crx {
            control,
            target,
            theta,
        } => out.extend([
            Gate::H(target),
            Gate::Rz(target, theta / 2.0),
            Gate::Cnot { control, target },
            Gate::Rz(target, -theta / 2.0),
            Gate::Cnot { control, target },
            Gate::H(target),
        ]),
        // T = RZ(pi/4) up to phase.
        Gate::Ccx {
            controls: [a, b],
            target: c,
        } => out.extend([
            Gate::H(c),
            Gate::Cnot {
                control: b,
                target: c,
            },
            Gate::Rz(c, -FRAC_PI_4),
            Gate::Cnot {
                control: a,
                target: c,
            },
            Gate::Rz(c, FRAC_PI_4),
            Gate::Cnot {
                control: b,
                target: c,
            },
            Gate::Rz(c, -FRAC_PI_4),
            Gate::Cnot {
                control: a,
                target: c,
            },
            Gate::Rz(b, FRAC_PI_4),
            Gate::Rz(c, FRAC_PI_4),
            Gate::H(c),
            Gate::Cnot {
                control: a,
                target: b,
            },
            Gate::Rz(a, FRAC_PI_4),
            Gate::Rz(b, -FRAC_PI_4),
            Gate::Cnot {
                control: a,
                target: b,
            },
        ]),
        g => out.push(g),
    }
}

pub fn zero_state(n_qubits: usize) -> Result<QuantumState> {
    QuantumState::zero(n_qubits)
}

pub fn apply_gate(state: &QuantumState, gate: &Gate) -> Result<QuantumState> {
    let mut next = state.clone();
    next.apply(gate)?;
    Ok(next)
}

pub fn run(circuit: &Circuit) -> Result<QuantumState> {
    circuit.run()
}

pub fn adjoint(circuit: &Circuit) -> Circuit {
    circuit.adjoint()
}

pub fn compose(first: &Circuit, second: &Circuit) -> Result<Circuit> {
    first.compose(second)
}

pub fn sample(state: &QuantumState, shots: u64, seed: u64) -> Result<ShotCounts> {
    state.sample(shots, seed)
}

pub fn prob_all_zero(state: &QuantumState) -> f64 {
    state.prob_all_zero()
}

pub fn logical_depth(circuit: &Circuit) -> usize {
    circuit.logical_depth()
}

pub fn decompose(circuit: &Circuit) -> Circuit {
    circuit.decompose()
}
