use crate::spectral::Representation;
use thiserror::Error;

/// Errors raised by the operator calculus, the solver and the persistence layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index {index} is already present in multi-index {existing:?}")]
    DuplicateIndex { index: usize, existing: Vec<usize> },

    #[error("invalid multi-index {indices:?} for complex dimension {n}")]
    InvalidMultiIndex { indices: Vec<usize>, n: usize },

    #[error("bidegree mismatch: expected (0,{expected}), found (0,{found})")]
    BidegreeMismatch { expected: usize, found: usize },

    #[error("fields are defined on different grids")]
    GridMismatch,

    #[error("field is not in {expected:?} representation")]
    Representation { expected: Representation },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("inadmissible bilinear map: {0}")]
    InadmissibleSpec(String),

    #[error("operator undefined: {0}")]
    Undefined(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("constraint violated: relative residual {residual:e}")]
    Constraint { residual: f64 },

    #[error("pressure source has a solenoidal part: relative residual {residual:e}")]
    PressureResidual { residual: f64 },

    #[error("non-finite values detected at t = {t}")]
    BlowUp { t: f64 },

    #[error("CFL violation at t = {t}: dt = {dt:e} exceeds limit {limit:e}")]
    Cfl { t: f64, dt: f64, limit: f64 },

    #[error("need at least {needed} snapshots, have {have}")]
    TooFewSnapshots { needed: usize, have: usize },

    #[error("dense operator dimension {dim} exceeds the bound {bound}")]
    SizeBound { dim: usize, bound: usize },

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch in {file}")]
    Checksum { file: String },

    #[error("truncated blob {file}: expected {expected} bytes, found {found}")]
    Truncated {
        file: String,
        expected: usize,
        found: usize,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
