use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("problem has no variables")]
    Empty,
    #[error("block {block} has invalid dimension {dim}")]
    BadBlockDim { block: usize, dim: usize },
    #[error("row {row} ({label}): {reason}")]
    BadRow { row: usize, label: String, reason: String },
    #[error("objective: {0}")]
    BadObjective(String),
    #[error("entry ({i}, {j}) out of range for block {block} of dimension {dim}")]
    IndexOutOfRange { block: usize, i: usize, j: usize, dim: usize },
    #[error("external solver: {0}")]
    External(String),
    #[error("sdpa format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
