//! Multilayer parameterized quantum circuit: the Born machine's generator.
//!
//! The ansatz is an initial layer of `R_y` rotations followed by `depth`
//! blocks, each block being a `R_z R_x R_z` triple on every qubit and a ring
//! of CNOTs. Parameter count is `(3*depth + 1) * n_qubits`.
//!
//! Parameter layout (fixed, layout version 1): entries `0..n` hold the initial
//! `R_y` angles, then block `l` stores `(theta_l^{j,1}, theta_l^{j,2},
//! theta_l^{j,3})` per qubit `j`. The triple realizes the unitary
//! `R_z(theta1) R_x(theta2) R_z(theta3)`, so `theta3` is applied first.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};
use crate::statevector::{init_zero_state, GateOp, MAX_QUBITS};

pub const CHECKPOINT_LAYOUT_VERSION: u32 = 1;

/// Layer layout of the circuit ansatz.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitSpec {
    n_qubits: usize,
    depth: usize,
    entanglement_pairs: Vec<(usize, usize)>,
}

impl CircuitSpec {
    /// Ring entanglement: `CNOT(j, j+1 mod n)` for every `j`, repeated after
    /// each rotation block.
    pub fn ring(n_qubits: usize, depth: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let pairs = if n_qubits == 1 {
            Vec::new()
        } else {
            (0..n_qubits).map(|j| (j, (j + 1) % n_qubits)).collect()
        };
        Self::with_pairs(n_qubits, depth, pairs)
    }

    pub fn with_pairs(
        n_qubits: usize,
        depth: usize,
        entanglement_pairs: Vec<(usize, usize)>,
    ) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        for &(c, t) in &entanglement_pairs {
            if c >= n_qubits || t >= n_qubits {
                return Err(Error::QubitIndex {
                    index: c.max(t),
                    n_qubits,
                });
            }
            if c == t {
                return Err(Error::ControlEqualsTarget(c));
            }
        }
        Ok(Self {
            n_qubits,
            depth,
            entanglement_pairs,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn entanglement_pairs(&self) -> &[(usize, usize)] {
        &self.entanglement_pairs
    }

    /// `(3d + 1) n` rotation angles.
    pub fn param_count(&self) -> usize {
        (3 * self.depth + 1) * self.n_qubits
    }

    /// Random initialization `theta ~ Uniform[0, 2pi)`.
    pub fn random_params(&self, rng: &mut impl Rng) -> ParamVector {
        let theta = (0..self.param_count())
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        ParamVector::new(theta).expect("uniform draws are finite")
    }
}

/// The circuit's rotation angles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    theta: Vec<f64>,
}

impl ParamVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFiniteAngle);
        }
        Ok(Self { theta })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            theta: vec![0.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    /// Copy with entry `index` shifted by `+pi/2` (`ShiftDir::Plus`) or
    /// `-pi/2` (`ShiftDir::Minus`); all other entries are untouched.
    pub fn shifted(&self, index: usize, dir: ShiftDir) -> Result<ParamVector> {
        if index >= self.theta.len() {
            return Err(Error::ParamIndex {
                index,
                count: self.theta.len(),
            });
        }
        let mut theta = self.theta.clone();
        theta[index] += match dir {
            ShiftDir::Plus => FRAC_PI_2,
            ShiftDir::Minus => -FRAC_PI_2,
        };
        Ok(ParamVector { theta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShiftDir {
    Plus,
    Minus,
}

fn check_dims(spec: &CircuitSpec, params: &ParamVector) -> Result<()> {
    if params.len() != spec.param_count() {
        return Err(Error::ParamLength {
            got: params.len(),
            expected: spec.param_count(),
        });
    }
    Ok(())
}

/// Expands spec + params into the ordered gate list.
pub fn build_circuit(spec: &CircuitSpec, params: &ParamVector) -> Result<Vec<GateOp>> {
    check_dims(spec, params)?;
    let n = spec.n_qubits;
    let theta = params.as_slice();
    let mut gates = Vec::with_capacity(n + spec.depth * (3 * n + spec.entanglement_pairs.len()));
    for (j, &angle) in theta[..n].iter().enumerate() {
        gates.push(GateOp::ry(j, angle));
    }
    for l in 0..spec.depth {
        let base = n + 3 * n * l;
        for j in 0..n {
            let t1 = theta[base + 3 * j];
            let t2 = theta[base + 3 * j + 1];
            let t3 = theta[base + 3 * j + 2];
            // R_z(t1) R_x(t2) R_z(t3) acting on the state: t3 first.
            gates.push(GateOp::rz(j, t3));
            gates.push(GateOp::rx(j, t2));
            gates.push(GateOp::rz(j, t1));
        }
        for &(c, t) in &spec.entanglement_pairs {
            gates.push(GateOp::cnot(c, t));
        }
    }
    Ok(gates)
}

/// Evolves `|0...0>` through the circuit and reads off the exact Born
/// probability table.
pub fn exact_distribution(spec: &CircuitSpec, params: &ParamVector) -> Result<DiscreteDistribution> {
    let gates = build_circuit(spec, params)?;
    let mut state = init_zero_state(spec.n_qubits)?;
    state.apply_gates(&gates)?;
    Ok(state.probabilities())
}

/// Evolves and measures: `batch_size` bitstrings from `p_theta`.
pub fn generate(
    spec: &CircuitSpec,
    params: &ParamVector,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Result<SampleBatch> {
    let gates = build_circuit(spec, params)?;
    let mut state = init_zero_state(spec.n_qubits)?;
    state.apply_gates(&gates)?;
    Ok(state.sample(batch_size, rng))
}

/// On-disk checkpoint: layout version, circuit shape, and the flat angles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layout_version: u32,
    pub n_qubits: usize,
    pub depth: usize,
    pub theta: Vec<f64>,
}

impl Checkpoint {
    pub fn new(spec: &CircuitSpec, params: &ParamVector) -> Self {
        Self {
            layout_version: CHECKPOINT_LAYOUT_VERSION,
            n_qubits: spec.n_qubits,
            depth: spec.depth,
            theta: params.as_slice().to_vec(),
        }
    }

    pub fn into_parts(self) -> Result<(CircuitSpec, ParamVector)> {
        if self.layout_version != CHECKPOINT_LAYOUT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported layout version {}",
                self.layout_version
            )));
        }
        let spec = CircuitSpec::ring(self.n_qubits, self.depth)?;
        let params = ParamVector::new(self.theta)?;
        check_dims(&spec, &params)?;
        Ok((spec, params))
    }
}

pub fn save_checkpoint(spec: &CircuitSpec, params: &ParamVector, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(file, &Checkpoint::new(spec, params))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CircuitSpec, ParamVector)> {
    let file = std::fs::File::open(path)?;
    let ckpt: Checkpoint =
        serde_json::from_reader(file).map_err(|e| Error::Checkpoint(e.to_string()))?;
    ckpt.into_parts()
}
