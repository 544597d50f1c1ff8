use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no element structure could be recovered from the HTML input")]
    UnparsableHtml,
    #[error("unknown tagger plugin `{0}`")]
    UnknownTagger(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("loss is not deterministic: {first} != {second}")]
    NonDeterministicLoss { first: f64, second: f64 },
    #[error("probabilities do not form a distribution (sum = {0})")]
    InvalidDistribution(f64),
    #[error("class `{0}` has zero occurrences")]
    ZeroCount(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("cannot build {folds} source-grouped folds from {sources} sources")]
    TooFewSources { sources: usize, folds: usize },
    #[error("loss diverged at epoch {epoch}, batch {batch} (state dumped to {dump:?})")]
    DivergedLoss {
        epoch: usize,
        batch: usize,
        dump: Option<PathBuf>,
    },
    #[error("class mismatch: label `{0}` is not known to the model")]
    ClassMismatch(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("duplicate table id `{0}`")]
    DuplicateTableId(String),
    #[error("invalid node path {path:?} in record `{record}`")]
    InvalidNodePath { record: String, path: Vec<usize> },
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported checkpoint format version {0}")]
    CheckpointVersion(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
