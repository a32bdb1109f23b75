//! Discrete distributions over computational-basis outcomes and batches of
//! measured bitstrings.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact probability table over the `2^n` basis states of an `n`-bit register.
///
/// Outcome `x` is the bitstring of `x` in base two with bit 0 (qubit 0) as the
/// most significant bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDistribution {
    n_bits: usize,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Wraps a probability table, checking shape, nonnegativity and
    /// normalization (1e-9).
    pub fn new(n_bits: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != 1 << n_bits {
            return Err(Error::DimensionMismatch {
                context: "probability table length vs 2^n",
                left: probs.len(),
                right: 1 << n_bits,
            });
        }
        if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
            return Err(Error::NonFinite("probability table"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::OutOfRange(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { n_bits, probs })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, outcome: usize) -> f64 {
        self.probs[outcome]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Expectation of `f` under the table: `Σ_x p(x) f(x)`.
    pub fn expect(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(x, p)| p * f(x))
            .sum()
    }

    /// Draws `batch_size` i.i.d. outcomes by inverse-CDF lookup.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> SampleBatch {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let states = (0..batch_size)
            .map(|_| {
                let u: f64 = rng.gen();
                cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1)
            })
            .collect();
        SampleBatch {
            n_bits: self.n_bits,
            states,
        }
    }
}

/// A batch of measured bitstrings, stored as basis-state indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleBatch {
    n_bits: usize,
    states: Vec<usize>,
}

impl SampleBatch {
    pub fn new(n_bits: usize, states: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&s| s >= 1 << n_bits) {
            return Err(Error::OutOfRange(format!(
                "state {bad} outside 2^{n_bits} outcomes"
            )));
        }
        Ok(Self { n_bits, states })
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    /// Bit `i` (qubit `i`) of sample `k`; bit 0 is the most significant.
    pub fn bit(&self, k: usize, i: usize) -> u8 {
        bit_of(self.states[k], i, self.n_bits)
    }

    /// Casts the batch to real columns in `{0,1}`: an `n_bits x m` matrix with
    /// one sample per column.
    pub fn to_real_columns(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_bits, self.states.len(), |i, k| {
            f64::from(self.bit(k, i))
        })
    }
}

/// Bit `i` of basis index `state` in an `n_bits` register (bit 0 = MSB).
pub fn bit_of(state: usize, i: usize, n_bits: usize) -> u8 {
    ((state >> (n_bits - 1 - i)) & 1) as u8
}

/// Renders a basis index as its bitstring, e.g. `5` over 4 bits -> `"0101"`.
pub fn bitstring(state: usize, n_bits: usize) -> String {
    (0..n_bits)
        .map(|i| char::from(b'0' + bit_of(state, i, n_bits)))
        .collect()
}
