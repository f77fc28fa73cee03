//! Error type shared across the library.

use thiserror::Error;

/// All failure modes surfaced by estimation, data handling, and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// A trajectory was asked for a longer prefix than it recorded.
    #[error("horizon {requested} exceeds recorded horizon {recorded}")]
    HorizonExceeded { requested: usize, recorded: usize },

    /// Not enough data to satisfy a fitting or fold-construction precondition.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A configuration value is out of its legal range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The design matrix lost rank during a least-squares solve.
    #[error("rank-deficient design for feature basis '{basis}' (pivot {pivot_index}, relative magnitude {relative_pivot:.3e})")]
    RankDeficient {
        basis: String,
        pivot_index: usize,
        relative_pivot: f64,
    },

    /// A weight passed to a weighted fit was negative.
    #[error("negative weight {weight} at item {index}")]
    NegativeWeight { index: usize, weight: f64 },

    /// A target sample landed in a region the behavior data never visited.
    #[error("coverage violation: {violations} of {total} target samples fall where behavior data has zero mass (first at bin {first_bin:?})")]
    CoverageViolation {
        violations: usize,
        total: usize,
        first_bin: Vec<usize>,
    },

    /// An iterative solver ran out of iterations.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// The input domain does not support the requested operation.
    #[error("unsupported domain: {0}")]
    UnsupportedDomain(String),

    /// A degenerate statistic (zero variance where a spread is required).
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// Dataset serialization / deserialization problems.
    #[error("serialization error at line {line}: {message}")]
    Serialization { line: usize, message: String },

    /// A benchmark run failed; names the seed and estimator responsible.
    #[error("seed {seed}, estimator {estimator}: {source}")]
    Estimator {
        seed: usize,
        estimator: String,
        #[source]
        source: Box<Error>,
    },

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
