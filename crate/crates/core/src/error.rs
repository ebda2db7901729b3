use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("series is empty after removing null samples")]
    EmptyResult,

    #[error("series has {len} samples, at least {min} required")]
    TooFewSamples { len: usize, min: usize },

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("sample times must be strictly increasing (index {index})")]
    NonIncreasingTimes { index: usize },

    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate window: median sample interval is zero")]
    DegenerateWindow,

    #[error("sample time {time} lies outside window [{start}, {end}]")]
    OutOfWindow { time: f64, start: f64, end: f64 },

    #[error("series spans {span} s, shorter than the {window} s window")]
    SeriesTooShort { span: f64, window: f64 },

    #[error("input is not uniformly sampled")]
    NonUniformInput,

    #[error("power spectrum is identically zero")]
    ZeroSpectrum,

    #[error("spectrum has {bins} bins, fewer than the {bands} requested bands")]
    TooFewBins { bins: usize, bands: usize },

    #[error("trajectory has {len} frames, at least {min} required")]
    TooFewFrames { len: usize, min: usize },

    #[error("missing signal {0}")]
    MissingSignal(String),

    #[error("sample is empty")]
    EmptySample,

    #[error("only one class is present")]
    SingleClass,

    #[error("class {class} has {count} members, at least {needed} required")]
    ClassTooSmall { class: u8, count: usize, needed: usize },

    #[error("split leaves a side without both classes")]
    DegenerateSplit,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },

    #[error("SMO did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("covariance matrix is not positive definite after jitter escalation")]
    SingularCovariance,

    #[error("file {path}: {message}")]
    MissingFile { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    MalformedRow { path: PathBuf, line: u64, message: String },

    #[error("unknown signal kind `{0}`")]
    UnknownKind(String),

    #[error("duplicate patient `{0}`")]
    DuplicatePatient(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("stage `{stage}`: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        match self {
            Error::Stage { .. } => self,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
