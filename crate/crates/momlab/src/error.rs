use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// A value lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// An arithmetic result left the representable range (overflow, ∞, NaN).
    #[error("range error: {0}")]
    Range(String),

    /// An operation only implemented for certain dimensions was called
    /// on an unsupported one.
    #[error("unsupported dimension {got}: {context}")]
    UnsupportedDimension { got: usize, context: String },

    /// Invalid parameter combination (e.g. q >= p in the coupling bound).
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A concavity precondition failed; carries the worst violating node.
    #[error("concavity violated at x = {at} (second difference {violation:.3e}); largest admissible delta0 = {delta0:?}")]
    Concavity {
        at: f64,
        violation: f64,
        delta0: Option<f64>,
    },

    /// Gibbs normalization produced zero or non-finite mass.
    #[error("normalization error: {0}")]
    Normalization(String),

    /// Target measure is degenerate for the unregularized problem
    /// (supported on a point / hyperplane, Theta = 0).
    #[error("degenerate target: {0}")]
    DegenerateTarget(String),

    /// The fixed-point iteration diverged; the residual trace is attached.
    #[error("solver did not converge after {iterations} iterations (last residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },

    /// Curvature class membership precondition failed.
    #[error("class membership error: {0}")]
    ClassMembership(String),

    /// Malformed input file; carries a 1-based line number when known.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
