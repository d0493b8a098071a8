use thiserror::Error;

/// Errors surfaced by the simulator.
///
/// The CLI maps these onto process exit codes: capacity -> 2, invalid
/// input -> 3, numerical -> 4.
#[derive(Debug, Error)]
pub enum Error {
    /// A requested size exceeds a hard memory/feasibility cap.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Malformed specification, argument, or file contents.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to converge or produced a degenerate
    /// result (e.g. a flat scan curve with no half-maximum crossing).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
