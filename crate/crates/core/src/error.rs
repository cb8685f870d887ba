use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("item `{0}` has no annotations")]
    NoAnnotations(String),
    #[error("item `{item}` carries non-binary label {label}")]
    NonBinaryLabel { item: String, label: i64 },
    #[error("item `{item}` has {available} annotations, cannot subsample {requested}")]
    InsufficientAnnotations {
        item: String,
        available: usize,
        requested: usize,
    },
    #[error("duplicate item id `{0}`")]
    DuplicateItem(String),
    #[error("gold table is empty")]
    EmptyGold,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bias magnitude {0} outside [0, 0.5]")]
    BetaOutOfRange(f64),
    #[error("stratum `{0}` has no bias direction")]
    MissingDirection(String),
    #[error("pool composition has no annotations per item")]
    EmptyComposition,
    #[error("invalid gold shape: {0}")]
    InvalidShape(String),
    #[error("tokens per item must be at least 1")]
    NoTokens,
    #[error("vocabulary size must be an even number of at least 2, got {0}")]
    InvalidVocabulary(usize),
    #[error("benchmark shares must be positive and sum to one: {0}")]
    InvalidBenchmark(String),
    #[error("stratum `{0}` is in the benchmark but absent from the pool")]
    AbsentStratum(String),
    #[error("stratum `{0}` is in the pool but absent from the benchmark")]
    UnknownStratum(String),
    #[error("normalizing constant must be positive, got {0}")]
    NonPositiveConstant(f64),
    #[error("weights have not been normalized")]
    NotNormalized,
    #[error(
        "stratum `{stratum}` would get {count} replicas; use the min-to-one policy or a larger constant"
    )]
    NegativeReplication { stratum: String, count: i64 },
    #[error("items without text: {0:?}")]
    MissingText(Vec<String>),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("prediction and gold items differ: {0:?}")]
    ItemMismatch(Vec<String>),
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("cannot aggregate zero runs")]
    NoRuns,
    #[error("runs have mixed configurations")]
    MixedConfigurations,
    #[error("split counts sum to {requested} but the table has {available} items")]
    SplitMismatch { requested: usize, available: usize },
}
