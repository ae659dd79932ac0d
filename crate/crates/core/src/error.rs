use thiserror::Error;

use crate::schema::{Crop, Violation};

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("unknown district {0:?}")]
    UnknownDistrict(String),
    #[error("unknown crop {0:?}")]
    UnknownCrop(String),
    #[error("invalid record: {}", join(.0))]
    InvalidRecord(Vec<Violation>),
    #[error("feature vector has {0} values, expected 46")]
    FeatureLength(usize),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty")]
    EmptyInput,
    #[error("header mismatch at column {column}: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        column: usize,
        expected: String,
        found: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("need at least 2 records to split, have {0}")]
    TooFewRecords(usize),
    #[error("train ratio {0} not in (0, 1)")]
    InvalidRatio(f64),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("sample is empty")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction/actual lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("actual value {0} at index {1} is too close to zero")]
    NearZeroActual(f64, usize),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("no model for crop {0}")]
    MissingCropModel(Crop),
    #[error("unknown plot kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// True when training produced a non-finite loss.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            PipelineError::Model(ModelError::Network(NnError::DivergedLoss { .. }))
                | PipelineError::Eval(EvalError::Model(ModelError::Network(NnError::DivergedLoss { .. })))
        )
    }
}
