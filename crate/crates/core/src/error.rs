use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("edge set contains a cycle through edge ({i}, {j})")]
    Cycle { i: usize, j: usize },
    #[error("tree is disconnected: node {node} is unreachable from node 1")]
    Disconnected { node: usize },
    #[error("edge ({i}, {j}) has weight {w}; need 0 < |w| <= 0.999")]
    WeightRange { i: usize, j: usize, w: f64 },
    #[error("duplicate edge ({i}, {j})")]
    DuplicateEdge { i: usize, j: usize },
    #[error("node {0} not found")]
    NodeNotFound(usize),
    #[error("edge ({0}, {1}) not found")]
    EdgeNotFound(usize, usize),
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parameter out of range: {0}")]
    ParameterRange(String),
    #[error("empty node subset")]
    EmptySubset,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("matrix is not symmetric positive definite")]
    NotSpd,
    #[error("log-determinants differ by {log_det_ratio:e} (tolerance 1e-9); models do not share entropy")]
    EntropyMismatch { log_det_ratio: f64 },
    #[error("cannot split edge weight {w} with first half {w1}: second half {w2} out of range")]
    SplitInfeasible { w: f64, w1: f64, w2: f64 },
    #[error("node {0} is not a leaf")]
    NotALeaf(usize),
    #[error("node {0} does not have degree two")]
    NotDegreeTwo(usize),
    #[error("grafting node {cut} back onto its current parent {parent} is a no-op")]
    NoOp { cut: usize, parent: usize },
    #[error("grafting chain step {step} cannot be applied: {reason}")]
    InapplicableChain { step: usize, reason: Box<Error> },
    #[error("matrix is not orthogonal (max |F^T F - I| = {0:e})")]
    NotOrthogonal(f64),
    #[error("size {n} exceeds search limit {limit}")]
    SizeLimitExceeded { n: usize, limit: usize },
    #[error("numerical invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// True for failures caused by numerical preconditions rather than malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotSpd
                | Error::EntropyMismatch { .. }
                | Error::DimensionMismatch(..)
                | Error::Invariant(_)
                | Error::NotOrthogonal(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
