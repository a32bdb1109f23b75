//! Evaluation of learnt distributions: total variation against the target,
//! per-mode masses, invalid mass, and feature-space dumps.
//!
//! Total variation is always computed from the exact simulator table, never
//! from sampled frequencies; an explicitly-labelled sampled variant exists
//! for diagnostics only.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bas::{target_distribution, BasSpec};
use crate::circuit::{exact_distribution, CircuitSpec, ParamVector};
use crate::dist::{DiscreteDistribution, SampleBatch};
use crate::error::{Error, Result};
use crate::neural::MlpNet;

/// Snapshot of the learnt distribution against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iteration: usize,
    pub tv: f64,
    /// Mass on each valid pattern, in ascending basis-index order.
    pub mode_masses: Vec<f64>,
    /// Total mass on invalid patterns; complements the mode masses to 1.
    pub invalid_mass: f64,
}

/// `TV(p, q) = 1/2 sum_x |p(x) - q(x)|`, in `[0, 1]`.
pub fn total_variation(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            context: "distribution support sizes",
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(0.5
        * p.probs()
            .iter()
            .zip(q.probs())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Diagnostic only: TV between empirical frequencies of a batch and a table.
pub fn sampled_total_variation(batch: &SampleBatch, q: &DiscreteDistribution) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut freq = vec![0.0; q.len()];
    for &s in batch.states() {
        freq[s] += 1.0 / batch.len() as f64;
    }
    let empirical = DiscreteDistribution::new(q.n_bits(), freq)?;
    total_variation(&empirical, q)
}

/// Exact evaluation of a circuit against a BAS target.
pub fn evaluate(
    circuit_spec: &CircuitSpec,
    params: &ParamVector,
    bas_spec: &BasSpec,
) -> Result<EvalReport> {
    if circuit_spec.n_qubits() != bas_spec.n_qubits() {
        return Err(Error::DimensionMismatch {
            context: "circuit qubits vs BAS pixels",
            left: circuit_spec.n_qubits(),
            right: bas_spec.n_qubits(),
        });
    }
    let p = exact_distribution(circuit_spec, params)?;
    let target = target_distribution(bas_spec);
    let tv = total_variation(&p, &target)?;
    let mode_masses: Vec<f64> = bas_spec
        .valid_states()
        .iter()
        .map(|&x| p.prob(x))
        .collect();
    let invalid_mass = 1.0 - mode_masses.iter().sum::<f64>();
    Ok(EvalReport {
        iteration: 0,
        tv,
        mode_masses,
        invalid_mass,
    })
}

/// CSV trace: `iteration,tv,invalid_mass,mode_0..mode_{N-1}` per row.
pub fn write_trace_csv(trace: &[EvalReport], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let n_modes = trace.first().map_or(0, |r| r.mode_masses.len());
    write!(out, "iteration,tv,invalid_mass")?;
    for i in 0..n_modes {
        write!(out, ",mode_{i}")?;
    }
    writeln!(out)?;
    for r in trace {
        write!(out, "{},{},{}", r.iteration, r.tv, r.invalid_mass)?;
        for m in &r.mode_masses {
            write!(out, ",{m}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Dumps 2-d feature vectors of generated and real samples as CSV rows
/// `x1,x2,source` with `source` in `{gen, real}`.
pub fn dump_features(
    net: &MlpNet,
    gen_batch: &SampleBatch,
    real_batch: &SampleBatch,
    path: &Path,
) -> Result<()> {
    let zg = net.features_eval(&gen_batch.to_real_columns())?;
    let zr = net.features_eval(&real_batch.to_real_columns())?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x1,x2,source")?;
    for col in zg.column_iter() {
        writeln!(out, "{},{},gen", col[0], col[1])?;
    }
    for col in zr.column_iter() {
        writeln!(out, "{},{},real", col[0], col[1])?;
    }
    Ok(())
}
