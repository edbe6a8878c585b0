use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// No `q <= q_max` with `f^q >= g^-1` (or `f^q >= g`) could be certified.
    #[error("no dominant witness q <= {q_max} found for the pair")]
    DominantWitnessNotFound { q_max: i64 },

    /// The order oracle could not certify a comparison the search depended on.
    #[error("order oracle inconclusive while comparing {context} (margin {margin:e}, {resolution} evaluation points)")]
    OrderInconclusive {
        context: String,
        margin: f64,
        resolution: usize,
    },

    #[error("pseudo-distance estimate {value} is negative beyond tolerance {tolerance}")]
    NegativeUnderTolerance { value: f64, tolerance: f64 },

    #[error("inverse solve did not converge at x = {x} after {iterations} bisection steps")]
    BisectionStall { x: f64, iterations: usize },

    #[error("invalid circle lift: {0}")]
    InvalidLift(String),

    #[error("rotation number enclosure of the denominator [{lo}, {hi}] contains zero")]
    RotFNearZero { lo: f64, hi: f64 },

    #[error("hamiltonian is not certified strictly positive on the sphere (certified lower bound {lower_bound:e})")]
    FNotPositive { lower_bound: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("the class must be nonzero")]
    ZeroClass,

    #[error("hypothesis failed: {0}")]
    HypothesisFailed(String),

    #[error("grid graph at resolution {resolution} does not connect the requested offset")]
    ResolutionTooCoarse { resolution: usize },

    #[error("invalid hamiltonian: {0}")]
    InvalidHamiltonian(String),

    #[error("invalid metric: {0}")]
    InvalidMetric(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
