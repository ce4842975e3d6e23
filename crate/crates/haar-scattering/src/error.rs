//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by transform construction, learning, inversion and I/O.
#[derive(Debug, Error)]
pub enum Error {
    // ---- multiresolution construction ----
    #[error("signal dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("pairing over {expected} nodes is not a perfect matching: {reason}")]
    InvalidPairing { expected: usize, reason: String },
    #[error("pairing at level {level} covers {got} nodes, expected {expected}")]
    LevelSizeMismatch {
        level: usize,
        got: usize,
        expected: usize,
    },
    #[error("depth {requested} exceeds maximum {max}")]
    DepthTooLarge { requested: usize, max: usize },
    #[error("grid variant {variant} out of range (< {max})")]
    VariantOutOfRange { variant: usize, max: usize },
    #[error("edge ({0}, {1}) is invalid for this graph")]
    InvalidEdge(usize, usize),
    #[error("vertex count mismatch: multiresolution has {multires}, graph has {graph}")]
    VertexCountMismatch { multires: usize, graph: usize },

    // ---- scattering ----
    #[error("signal length {got} does not match multiresolution dimension {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("feature index {q} out of range for depth {depth}")]
    FeatureIndexOutOfRange { q: usize, depth: usize },
    #[error("inconsistent scattering pair: difference {diff} exceeds sum {sum}")]
    InconsistentPair { sum: f64, diff: f64 },

    // ---- matching / learning ----
    #[error("cost matrix has odd size {0}; perfect matching needs an even node count")]
    OddMatchingSize(usize),
    #[error("matching size {0} exceeds the brute-force enumeration bound {1}")]
    BruteForceTooLarge(usize, usize),
    #[error("empty training batch")]
    EmptyBatch,
    #[error("scattering tensors in batch disagree in shape or level")]
    BatchShapeMismatch,
    #[error("ensemble size {n} exceeds training set size {train}")]
    EnsembleTooLarge { n: usize, train: usize },

    // ---- reconstruction ----
    #[error("pairings are not interlaced")]
    NotInterlaced,
    #[error("pairings cover different node counts: {0} vs {1}")]
    PairingSizeMismatch(usize, usize),
    #[error("ambiguous inversion at level {level}: layer takes too few distinct values")]
    Ambiguous { level: usize },
    #[error("inconsistent scattering data at level {level}: tensors do not come from a common signal")]
    Inconsistent { level: usize },
    #[error("reconstruction expects {expected} member transforms, got {got}")]
    FamilySizeMismatch { expected: usize, got: usize },

    // ---- feature selection / classification ----
    #[error("feature selection needs at least one row of class {0}")]
    EmptyClass(usize),
    #[error("feature vector length {got} does not match dictionary input width {expected}")]
    FeatureLengthMismatch { got: usize, expected: usize },
    #[error("kernel bandwidth must be positive, got {0}")]
    NonPositiveBandwidth(f64),
    #[error("training needs at least two classes")]
    SingleClass,
    #[error("linear system is singular even after jitter escalation")]
    SingularSystem,
    #[error("rotation matrix is not orthogonal (residual {0:.3e})")]
    NotOrthogonal(f64),

    // ---- datasets / I/O ----
    #[error("bad IDX magic {got:#010x}, expected {expected:#010x}")]
    BadIdxMagic { got: u32, expected: u32 },
    #[error("truncated IDX file: {0}")]
    TruncatedIdx(String),
    #[error("IDX image count {images} does not match label count {labels}")]
    IdxCountMismatch { images: usize, labels: usize },
    #[error("dataset has no ground-truth geometry")]
    MissingGeometry,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
