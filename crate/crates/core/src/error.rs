use thiserror::Error;

/// Errors raised by the synthesis and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("graph structure: {0}")]
    Structure(String),

    #[error("node index {index} out of range for {count} nodes")]
    NodeOutOfRange { index: usize, count: usize },

    #[error("matrix {0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("matrix {0} is not symmetric positive semidefinite")]
    NotPositiveSemidefinite(&'static str),

    #[error("(A, B) is not stabilizable: PBH test fails at eigenvalue {re} + {im}j")]
    NotStabilizable { re: f64, im: f64 },

    #[error("(Q, A) is not detectable: PBH test fails at eigenvalue {re} + {im}j")]
    NotDetectable { re: f64, im: f64 },

    #[error("no stabilizing solution: {0}")]
    NoStabilizingSolution(String),

    #[error("matrix is not Hurwitz (spectral abscissa {0})")]
    NotHurwitz(f64),

    /// Failure inside one node's subproblem. The inner error is part of the
    /// message rather than a `source`, so chains do not print it twice.
    #[error("node {node}: {inner}")]
    Node { node: usize, inner: Box<Error> },

    #[error("sparsity violation: {0}")]
    Sparsity(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("imaginary-axis pole at s = {0}j")]
    ImaginaryAxisPole(f64),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn at_node(self, node: usize) -> Self {
        Error::Node {
            node,
            inner: Box::new(self),
        }
    }
}
