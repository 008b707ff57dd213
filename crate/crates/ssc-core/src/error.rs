//! Crate-wide error type.

use alloc::string::String;

/// Errors surfaced by pattern handling, linear algebra, scoring, and search.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A pattern, factor, or support list violated a structural invariant.
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),

    /// Two objects that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A hyperparameter is outside its admissible range.
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),

    /// Input data contains NaN or infinite entries.
    #[error("non-finite input: {0}")]
    NonFinite(String),

    /// A matrix that must be positive definite is not (pivot <= 0).
    #[error("matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A conditional variance or likelihood denominator collapsed below the
    /// numerically trustworthy range for column `column` (0-based).
    #[error("conditioning failure in column {column}: value {value:e} below tolerance")]
    Conditioning { column: usize, value: f64 },

    /// A perturbation requested more edges than the pattern space holds.
    #[error("infeasible edge count: requested {requested}, capacity {capacity}")]
    InfeasibleEdgeCount { requested: usize, capacity: usize },

    /// Exhaustive enumeration would visit more patterns than the guard allows.
    #[error("model space too large: {patterns} patterns exceed limit {limit}")]
    SearchSpaceTooLarge { patterns: u128, limit: u128 },

    /// The curvature at a Laplace mode is not negative definite.
    #[error("Laplace approximation failed: {0}")]
    LaplaceFailure(String),

    /// An operation is limited to small dimensions (quadrature oracle).
    #[error("dimension {p} exceeds the supported maximum {max} for {what}")]
    DimensionTooLarge {
        p: usize,
        max: usize,
        what: &'static str,
    },

    /// Scores computed under different (data, hyperparameter) contexts were
    /// combined.
    #[error("score context mismatch: fingerprints {0:#x} and {1:#x} differ")]
    ContextMismatch(u64, u64),

    /// An evaluation point left the open domain of an integrand.
    #[error("out of domain: {0}")]
    OutOfDomain(String),

    /// A search ended with nothing scored (every seed failed).
    #[error("search produced no scored patterns: {0}")]
    SearchExhausted(String),

    /// An error inside an experiment replication, tagged with its job.
    #[error("{context}: {source}")]
    InContext {
        context: String,
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    /// Wrap with replication context, e.g. `"p=300 case=2 rep=4"`.
    pub fn in_context(self, context: String) -> Error {
        Error::InContext {
            context,
            source: alloc::boxed::Box::new(self),
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
