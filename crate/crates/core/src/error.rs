use thiserror::Error;

/// A node tried to read a payload it never received.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("locality violation: node {node} read the payload of node {accessed} in round {round}, which is not a neighbor")]
pub struct LocalityViolation {
    pub node: usize,
    pub round: usize,
    pub accessed: usize,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no connected sample found for n={n}, p_c={p_c} after {attempts} attempts")]
    Disconnected { n: usize, p_c: f64, attempts: usize },

    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),

    #[error("diagonal weight bound violated (need 0 <= delta <= w_ii <= Delta < 1): {0}")]
    WeightBounds(String),

    #[error("objective is not strongly convex; set reg > 0")]
    NotStronglyConvex,

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("line search failed to decrease the objective after {iterations} iterations")]
    LineSearch { iterations: usize },

    #[error("inner solver did not reach tolerance {tol:e} in {max_steps} Newton steps at node {node}")]
    InnerSolver {
        node: usize,
        tol: f64,
        max_steps: usize,
    },

    #[error("dense certification capped at dimension {cap}, got {dim}; sample a sub-instance instead")]
    TooLarge { dim: usize, cap: usize },

    #[error("contraction diagnostics require a non-bipartite topology (gamma_u = 0)")]
    Bipartite,

    #[error("eta = {eta} lies outside its admissible interval ({low}, {high})")]
    EtaOutOfRange { eta: f64, low: f64, high: f64 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Locality(#[from] LocalityViolation),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
