use std::io;

use thiserror::Error;

use crate::conllu::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}: {}", join_violations(.violations))]
    InvalidTree {
        sentence: String,
        violations: Vec<Violation>,
    },

    #[error("treebank {index} out of range for {m} treebanks")]
    TreebankOutOfRange { index: usize, m: usize },

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("invalid grid parameters: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("incompatible representations: {0}")]
    IncompatibleRepresentations(String),

    #[error("dense vectors, row {row}: {message}")]
    DenseVectors { row: usize, message: String },

    #[error("degenerate treebank representation: {0}")]
    DegenerateCentroid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no training data")]
    EmptyTrainingData,

    #[error("training diverged in epoch {epoch} at sentence {sentence}: loss {loss}")]
    Diverged {
        epoch: usize,
        sentence: String,
        loss: f64,
    },

    #[error("training loss did not decrease: initial {initial}, final {last}")]
    NoProgress { initial: f64, last: f64 },

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("missing LAS evidence: {0}")]
    MissingEvidence(String),

    #[error("sentence mismatch: {0}")]
    SentenceMismatch(String),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("suite spec: {0}")]
    SuiteSpec(String),
}

fn join_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
