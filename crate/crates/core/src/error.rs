use thiserror::Error;

/// Errors produced while building inputs, fitting, or evaluating a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no hyperedges in input")]
    EmptyInput,

    #[error("hyperedge {index} has {size} distinct node(s); at least 2 are required")]
    EdgeTooSmall { index: usize, size: usize },

    #[error("hyperedge {index} repeats node `{node}`")]
    RepeatedNode { index: usize, node: String },

    #[error("hyperedge {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: i64 },

    #[error("node index {node} out of range for {num_nodes} nodes")]
    NodeOutOfRange { node: usize, num_nodes: usize },

    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    #[error("node `{node}` has no value for covariate `{covariate}`")]
    MissingValue { node: String, covariate: String },

    #[error("hyperedge size {size} exceeds number of nodes {num_nodes}")]
    SizeExceedsNodes { size: usize, num_nodes: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("generator acceptance rate too low for size {size} ({accepted} accepted out of {attempts}); increase the planted affinity contrast or reduce the count")]
    LowAcceptance {
        size: usize,
        accepted: usize,
        attempts: u64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures raised by the numerics rather than by bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::LowAcceptance { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
