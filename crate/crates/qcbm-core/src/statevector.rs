//! Dense statevector simulation of small qubit registers.
//!
//! Gates are applied in place with stride arithmetic over the amplitude
//! array; no full `2^n x 2^n` matrix is ever materialized. Rotations follow
//! the exponential convention `R_m(theta) = exp(-i theta sigma_m / 2)`.

use num_complex::Complex64;
use rand::Rng;

use crate::dist::{DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

/// Single- or two-qubit gate baked into the circuit gate list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub target: usize,
    pub control: Option<usize>,
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Cnot,
}

impl GateOp {
    pub fn rx(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rx,
            target,
            control: None,
            angle,
        }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Ry,
            target,
            control: None,
            angle,
        }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Self {
            kind: GateKind::Rz,
            target,
            control: None,
            angle,
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self {
            kind: GateKind::Cnot,
            target,
            control: Some(control),
            angle: 0.0,
        }
    }

    /// The 2x2 matrix of a rotation gate, row-major.
    pub fn rotation_matrix(&self) -> [[Complex64; 2]; 2] {
        let half = self.angle / 2.0;
        let (s, c) = half.sin_cos();
        match self.kind {
            GateKind::Rx => [
                [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
                [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
            ],
            GateKind::Ry => [
                [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
            ],
            GateKind::Rz => [
                [Complex64::new(c, -s), Complex64::new(0.0, 0.0)],
                [Complex64::new(0.0, 0.0), Complex64::new(c, s)],
            ],
            GateKind::Cnot => panic!("CNOT has no 2x2 rotation matrix"),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        if self.target >= n_qubits {
            return Err(Error::QubitIndex {
                index: self.target,
                n_qubits,
            });
        }
        match self.kind {
            GateKind::Cnot => {
                let c = self.control.ok_or(Error::QubitIndex {
                    index: usize::MAX,
                    n_qubits,
                })?;
                if c >= n_qubits {
                    return Err(Error::QubitIndex {
                        index: c,
                        n_qubits,
                    });
                }
                if c == self.target {
                    return Err(Error::ControlEqualsTarget(c));
                }
            }
            _ => {
                if !self.angle.is_finite() {
                    return Err(Error::NonFiniteAngle);
                }
            }
        }
        Ok(())
    }
}

/// Complex amplitudes over the `2^n` computational basis states.
///
/// Qubit 0 is the most significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

/// The state `|0...0>`: amplitude 1 at index 0.
pub fn init_zero_state(n_qubits: usize) -> Result<StateVector> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::QubitCount(n_qubits));
    }
    let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
    amps[0] = Complex64::ONE;
    Ok(StateVector { n_qubits, amps })
}

impl StateVector {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dimension(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies `gate` in place. Norm is preserved (the matrices are unitary).
    pub fn apply_gate(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match gate.kind {
            GateKind::Cnot => self.apply_cnot(gate.control.unwrap(), gate.target),
            _ => self.apply_single(gate.target, &gate.rotation_matrix()),
        }
        Ok(())
    }

    pub fn apply_gates(&mut self, gates: &[GateOp]) -> Result<()> {
        for g in gates {
            self.apply_gate(g)?;
        }
        Ok(())
    }

    fn apply_single(&mut self, qubit: usize, u: &[[Complex64; 2]; 2]) {
        // qubit 0 is the MSB, so its bit position in the index is n-1-qubit.
        let pos = self.n_qubits - 1 - qubit;
        let half = 1usize << pos;
        let block = half << 1;
        let dim = self.amps.len();
        let mut base = 0;
        while base < dim {
            for off in 0..half {
                let i0 = base + off;
                let i1 = i0 + half;
                let a0 = self.amps[i0];
                let a1 = self.amps[i1];
                self.amps[i0] = u[0][0] * a0 + u[0][1] * a1;
                self.amps[i1] = u[1][0] * a0 + u[1][1] * a1;
            }
            base += block;
        }
    }

    fn apply_cnot(&mut self, control: usize, target: usize) {
        let c_mask = 1usize << (self.n_qubits - 1 - control);
        let t_mask = 1usize << (self.n_qubits - 1 - target);
        for i in 0..self.amps.len() {
            if i & c_mask != 0 && i & t_mask == 0 {
                self.amps.swap(i, i | t_mask);
            }
        }
    }

    /// Born probabilities `|alpha_x|^2` for every basis index.
    pub fn probabilities(&self) -> DiscreteDistribution {
        let probs: Vec<f64> = self.amps.iter().map(|a| a.norm_sqr()).collect();
        DiscreteDistribution::new(self.n_qubits, probs)
            .expect("unitary evolution preserves normalization")
    }

    /// Measures `batch_size` i.i.d. bitstrings in the computational basis.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> SampleBatch {
        self.probabilities().sample(batch_size, rng)
    }
}
