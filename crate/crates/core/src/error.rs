use thiserror::Error;

/// Errors produced by the optimizer, problem and analysis layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("gradient has a non-finite entry at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("even root of negative value {value} at index {index}")]
    NegativeRadicand { index: usize, value: f64 },

    #[error("metric entry {index} is not strictly positive ({value})")]
    NonPositiveMetric { index: usize, value: f64 },

    #[error("invalid box: lo[{index}] = {lo} > hi[{index}] = {hi}")]
    InvalidBox { index: usize, lo: f64, hi: f64 },

    #[error("weight sequence overflowed at t = {t}")]
    WeightOverflow { t: u64 },

    #[error("iterate became non-finite at t = {t}")]
    Diverged { t: u64 },

    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid override `{key}`: {reason}")]
    InvalidOverride { key: String, reason: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("label {label} out of range (K = {classes}) at sample {index}")]
    LabelOutOfRange { index: usize, label: i64, classes: usize },

    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    MagicMismatch { expected: u32, found: u32 },

    #[error("stochastic trace has no recorded round realizations")]
    MissingBranchRecord,

    #[error("feasible set is unbounded; the bound needs a finite diameter")]
    UnboundedSet,

    #[error("momentum decay lambda must be < 1 for this bound")]
    LambdaOne,

    #[error("value {value} at index {index} lies outside [0, M^2]")]
    DomainViolation { index: usize, value: f64 },

    #[error("need at least two observations per sample, got {0}")]
    InsufficientSamples(usize),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
