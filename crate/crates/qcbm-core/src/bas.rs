//! Bars-and-Stripes targets: validity predicate, exact target distribution,
//! and dataset sampling.
//!
//! Pixel `(r, c)` of an `h x w` image maps to bit index `r*w + c` (row-major);
//! a bit value of 1 means the pixel is on. A pattern is valid when every
//! column is constant (bars) or every row is constant (stripes); the all-on
//! and all-off images satisfy both and count once.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{bit_of, bitstring, DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasSpec {
    pub height: usize,
    pub width: usize,
}

impl BasSpec {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height * width > 20 {
            return Err(Error::Config(format!(
                "BAS {height}x{width} not simulable (need 1 <= h*w <= 20)"
            )));
        }
        Ok(Self { height, width })
    }

    pub fn n_qubits(&self) -> usize {
        self.height * self.width
    }

    /// `2^h + 2^w - 2` valid patterns.
    pub fn n_patterns(&self) -> usize {
        (1 << self.height) + (1 << self.width) - 2
    }

    /// Basis indices of the valid patterns, ascending.
    pub fn valid_states(&self) -> Vec<usize> {
        (0..1usize << self.n_qubits())
            .filter(|&x| self.is_valid_state(x))
            .collect()
    }

    /// Validity by basis index.
    pub fn is_valid_state(&self, state: usize) -> bool {
        let n = self.n_qubits();
        let pixel = |r: usize, c: usize| bit_of(state, r * self.width + c, n);
        let stripes = (0..self.height)
            .all(|r| (1..self.width).all(|c| pixel(r, c) == pixel(r, 0)));
        let bars = (0..self.width)
            .all(|c| (1..self.height).all(|r| pixel(r, c) == pixel(0, c)));
        stripes || bars
    }
}

/// Validity of an explicit bit sequence (row-major pixels).
pub fn is_valid_bas(bits: &[u8], spec: &BasSpec) -> Result<bool> {
    if bits.len() != spec.n_qubits() {
        return Err(Error::DimensionMismatch {
            context: "bitstring length vs h*w",
            left: bits.len(),
            right: spec.n_qubits(),
        });
    }
    let state = bits
        .iter()
        .fold(0usize, |acc, &b| (acc << 1) | usize::from(b & 1));
    Ok(spec.is_valid_state(state))
}

/// Uniform mass `1/N_BAS` on valid patterns, zero elsewhere.
pub fn target_distribution(spec: &BasSpec) -> DiscreteDistribution {
    let n = spec.n_qubits();
    let mass = 1.0 / spec.n_patterns() as f64;
    let probs = (0..1usize << n)
        .map(|x| if spec.is_valid_state(x) { mass } else { 0.0 })
        .collect();
    DiscreteDistribution::new(n, probs).expect("uniform table over valid patterns normalizes")
}

/// I.i.d. uniform draws over the valid patterns.
pub fn sample_target(spec: &BasSpec, batch_size: usize, rng: &mut impl Rng) -> SampleBatch {
    let valid = spec.valid_states();
    let states = (0..batch_size)
        .map(|_| valid[rng.gen_range(0..valid.len())])
        .collect();
    SampleBatch::new(spec.n_qubits(), states).expect("valid states are in range")
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    height: usize,
    width: usize,
    n_patterns: usize,
}

/// Writes the dataset as one bitstring per line (`<stem>.txt`) plus a JSON
/// sidecar with the spec and pattern count (`<stem>.json`).
pub fn dump_dataset(spec: &BasSpec, batch: &SampleBatch, stem: &Path) -> Result<()> {
    let mut lines = String::new();
    for &s in batch.states() {
        lines.push_str(&bitstring(s, spec.n_qubits()));
        lines.push('\n');
    }
    std::fs::write(stem.with_extension("txt"), lines)?;
    let sidecar = DatasetSidecar {
        height: spec.height,
        width: spec.width,
        n_patterns: spec.n_patterns(),
    };
    let file = std::fs::File::create(stem.with_extension("json"))?;
    serde_json::to_writer_pretty(file, &sidecar)?;
    Ok(())
}
