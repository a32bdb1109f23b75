//! Desk-scale training laboratory for quantum circuit Born machines.
//!
//! The crate simulates multilayer parameterized quantum circuits on a dense
//! statevector, samples bitstrings by Born's rule, estimates circuit-parameter
//! gradients with the parameter-shift rule, and trains the circuit as a
//! generative model of Bars-and-Stripes images under five likelihood-free
//! objectives (image-space MMD, non-saturating GAN, coding-rate reduction,
//! interpolated GAN/coding-rate, and adversarial deep-kernel MMD).
//!
//! Bit ordering is fixed project-wide: qubit 0 is the most significant bit of
//! the basis-state index, so index `x` in `[0, 2^n)` reads as the bitstring of
//! `x` in base two.

pub mod bas;
pub mod circuit;
pub mod dist;
pub mod error;
pub mod gradients;
pub mod kernels;
pub mod losses;
pub mod metrics;
pub mod neural;
pub mod seeds;
pub mod statevector;
pub mod trainer;

pub use bas::BasSpec;
pub use circuit::{CircuitSpec, ParamVector};
pub use dist::{DiscreteDistribution, SampleBatch};
pub use error::{Error, Result};
pub use kernels::RbfKernel;
pub use losses::{FeatureBatch, Mcr2Config, SampleSource};
pub use metrics::EvalReport;
pub use neural::{AdamState, MlpNet};
pub use statevector::{GateKind, GateOp, StateVector};
pub use trainer::{RunResult, Scheme, SchemeConfig};
