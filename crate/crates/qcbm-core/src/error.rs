use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count {0} outside supported range 1..=20")]
    QubitCount(usize),

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndex { index: usize, n_qubits: usize },

    #[error("control and target refer to the same qubit {0}")]
    ControlEqualsTarget(usize),

    #[error("rotation angle is not finite")]
    NonFiniteAngle,

    #[error("parameter index {index} out of range for {count} parameters")]
    ParamIndex { index: usize, count: usize },

    #[error("parameter vector has length {got}, circuit expects {expected}")]
    ParamLength { got: usize, expected: usize },

    #[error("dimension mismatch: {context} ({left} vs {right})")]
    DimensionMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    #[error("batch must be non-empty")]
    EmptyBatch,

    #[error("batch sizes must be equal ({left} vs {right})")]
    BatchSizeMismatch { left: usize, right: usize },

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("network architecture mismatch: {0}")]
    NetArchitecture(&'static str),

    #[error("training aborted at iteration {iteration}: {reason}")]
    TrainingAborted { iteration: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
