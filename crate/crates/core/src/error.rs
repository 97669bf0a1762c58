use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("edge list parse error at line {line}: {msg}")]
    EdgeListParse { line: usize, msg: String },

    #[error("duplicate edge {{{u}, {v}}} at line {line}")]
    DuplicateEdge { u: usize, v: usize, line: usize },

    #[error("graph is disconnected")]
    Disconnected,

    #[error("could not generate a connected instance after {0} attempts")]
    ConnectivityRetriesExhausted(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is singular or not positive definite: {0}")]
    Singular(String),

    #[error(
        "regularized Laplacian is singular: the connection is trivial and q = 0 \
         (need a non-trivial connection or q > 0)"
    )]
    AssumptionViolated,

    #[error(
        "cycle through node {node} has weight {weight:.6} > 1 (cos theta < 0): \
         not weakly inconsistent; use capped weight mode"
    )]
    StronglyInconsistentCycle { node: usize, weight: f64 },

    #[error("walk exceeded the step budget of {0} steps; the chain cannot terminate \
             when the connection is trivial and q = 0")]
    StepBudgetExceeded(u64),

    #[error("node {0} is isolated: the walk has no move with q = 0")]
    IsolatedNode(usize),

    #[error("sampler requires unit edge weights in DPP modes; edge {0} has weight {1}")]
    NonUnitWeights(usize, f64),

    #[error("invalid multi-type spanning forest: {0}")]
    InvalidMtsf(String),

    #[error("size guard exceeded: {0}")]
    SizeGuard(String),

    #[error("leverage score is zero on sampled edge {0}")]
    ZeroLeverage(usize),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("operator is not positive definite: negative curvature at iteration {0}")]
    IndefiniteOperator(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate least eigenspace: two Ritz values within {0:e}")]
    DegenerateEigenspace(f64),

    #[error("Davis-Kahan bound undefined: eps * lambda_n = {0:.6e} >= spectral gap {1:.6e}")]
    BoundUndefined(f64, f64),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}
