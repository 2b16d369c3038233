use alloc::string::String;

/// Errors produced by the analysis kernel.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("iteration did not converge: {0}")]
    NoConvergence(&'static str),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("output controllability with rank-deficient output matrix needs an s-grid")]
    MissingSGrid,
    #[error("domain is unbounded; properties cannot be preserved under every perturbation on an unbounded domain")]
    UnboundedDomain,
    #[error("nominal system does not satisfy the property on the domain")]
    NominalPropertyFails,
    #[error("the perturbation structure cannot realize a rank-dropping direction")]
    NotExpressible,
    #[error("nominal system already violates the property")]
    NominalAlreadyViolated,
    #[error("box is empty or has an invalid interval")]
    EmptyBox,
    #[error("delay must be nonnegative, got {0}")]
    NegativeDelay(f64),
    #[error("zero delay at index {0} cannot carry a consistency constraint")]
    ZeroDelayWithConstraint(usize),
    #[error("delay {value} at index {index} outside admissible interval [0, {bound}]")]
    DelayOutOfRange { index: usize, value: f64, bound: f64 },
    #[error("search box is unbounded")]
    UnboundedSearchBox,
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error("unsupported property for this operation: {0}")]
    UnsupportedProperty(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
