use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("missing label column {0:?}")]
    MissingLabelColumn(String),

    #[error("duplicate feature name {0:?}")]
    DuplicateFeatureName(String),

    #[error("non-numeric cell at data row {row}, column {column:?}: {value:?}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label value outside {{0,1}} at data row {row}: {value:?}")]
    LabelOutOfRange { row: usize, value: String },

    #[error("empty feature set: every feature fell below the prevalence threshold")]
    EmptyFeatureSet,

    #[error("cannot balance test set: class {0} absent from the held-out pool")]
    CannotBalanceTestSet(u8),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("both classes must be present")]
    SingleClass,

    #[error("non-finite objective encountered; check data scaling")]
    NonFiniteObjective,

    #[error("constant score: risk curve needs at least two distinct scores")]
    ConstantScore,

    #[error("only {available} features have positive importance, need {k}")]
    TooFewImportantFeatures { available: usize, k: usize },

    #[error("bootstrap resampling kept producing single-class samples after {0} retries")]
    BootstrapResampleFailed(usize),

    #[error("feature index {index} out of range for p={p}")]
    FeatureIndexOutOfRange { index: usize, p: usize },

    #[error("feature {0:?} required by the model is missing from the data")]
    MissingFeature(String),

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
