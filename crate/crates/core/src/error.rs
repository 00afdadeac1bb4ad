use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("root has no image within truncation")]
    RootHasNoImage,

    #[error("operation requires a circle system")]
    NotCircle,

    #[error("non-finite integrand value at t = {at}")]
    NonFinite { at: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("filter `{name}` is not a QMF (residual {residual:e})")]
    NonQmf { name: String, residual: f64 },

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("degree overflow: truncation {truncation} too small, need at least {required}")]
    DegreeOverflow { truncation: usize, required: usize },

    #[error("insufficient backward coordinates: need {needed}, have {available}")]
    InsufficientBackward { needed: usize, available: usize },

    #[error("cocycle undefined (filter zero on orbit at t = {at})")]
    CocycleUndefined { at: f64 },

    #[error("filter zero on orbit at t = {at}")]
    FilterZeroOnOrbit { at: f64 },

    #[error("tree is not regular: {0}")]
    NotRegular(String),

    #[error("node {0} is not in the tree")]
    NoSuchNode(usize),

    #[error("step count {requested} exceeds tree depth {depth}")]
    DepthExceeded { requested: usize, depth: usize },

    #[error("metric weights underflow for trees with more than {max} nodes")]
    MetricUnderflow { max: usize },

    #[error("invalid path prefix: {0}")]
    InvalidPrefix(String),

    #[error("undetermined at this truncation: {0}")]
    Undetermined(String),

    #[error("all children of node have zero weight at step {step}")]
    ZeroWeightStep { step: usize },

    #[error("validation failed for role {role}: residual {residual:e} at node {node}")]
    Validation { role: &'static str, node: usize, residual: f64 },

    #[error("value at node {node} is below the positivity threshold")]
    NotPositive { node: usize },

    #[error("negative value at node {node}")]
    Negative { node: usize },

    #[error("depth budget exceeded: W^(n) underflows at node {node}")]
    Underflow { node: usize },

    #[error("truncation exhausted: {0}")]
    TruncationExhausted(String),

    #[error("non-finite integrand at sample {index}")]
    NonFiniteSample { index: usize },

    #[error("mismatched fiber vectors: {0}")]
    FiberMismatch(String),

    #[error("invalid arc set: {0}")]
    InvalidArcs(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
