use thiserror::Error;

/// Unified error type for the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Pair-inclusion probability `alpha/n` exceeds 1.
    #[error("invalid sampling rate: alpha/n = {rate} exceeds 1")]
    InvalidRate { rate: f64 },

    /// A measurement fell where the densities put (numerically) zero mass, so
    /// the edge weight is undefined.
    #[error("measurement {s} outside density support (denominator {den:e})")]
    OutOfSupport { s: f64, den: f64 },

    /// Model parameters are structurally invalid (asymmetric table, identical
    /// in/out densities, bad probability table, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// The operation needs a symmetric `(p_in, p_out)` model; general density
    /// tables have no scalar edge weight and are served by belief propagation
    /// only.
    #[error("operation requires a symmetric (p_in, p_out) model")]
    UnsupportedModel,

    /// An edge weight is too close to the deformation parameter `x`, where the
    /// matrix entries of `H(x)` diverge.
    #[error("edge ({i},{j}) has weight {w} within 1e-6 of x = {x}; H(x) entries diverge")]
    WeightSaturation { i: usize, j: usize, w: f64, x: f64 },

    /// A message normalizer underflowed to (numerically) zero.
    #[error("message normalizer underflow at directed edge {edge}")]
    NumericalUnderflow { edge: usize },

    /// A spectral method found no informative eigenvalue (r = 0), so there is
    /// no embedding to cluster.
    #[error("no informative eigenvalue found (r = 0)")]
    NoInformativeEigenvalue,

    /// An iterative eigensolver could not certify the requested pairs.
    #[error("eigensolver failure: {0}")]
    SolverFailure(String),

    /// The factorial permutation search in the overlap score is capped.
    #[error("overlap permutation search supports k <= {max}, got k = {k}")]
    EnumerationBound { k: usize, max: usize },

    /// A class pair has no training measurement to estimate its density from.
    #[error("no training measurements for class pair ({a},{b})")]
    InsufficientTrainingData { a: u32, b: u32 },

    /// Vector/matrix sizes do not match the operator or graph.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Input exceeds a hard size limit of a dense routine.
    #[error("size {n} exceeds the dense-solver limit {max}")]
    SizeLimit { n: usize, max: usize },

    /// A scalar argument is out of its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A text input (graph file, labels file, point CSV) failed to parse.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
