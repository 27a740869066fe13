use thiserror::Error;

/// Errors produced by pool construction, training, selection and reporting.
#[derive(Error, Debug)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("empty dataset: {0}")]
    EmptyDataset(String),
    #[error("row {row}, column '{column}': cannot parse '{value}' as a number")]
    CsvParse {
        row: usize,
        column: String,
        value: String,
    },
    #[error("column '{0}' not found in header")]
    MissingColumn(String),
    #[error("dataset contains a single class '{0}'; at least two classes are required")]
    SingleClass(String),
    #[error("instance {id} has {got} features, expected {expected}")]
    DimensionMismatch {
        id: usize,
        expected: usize,
        got: usize,
    },
    #[error("test fraction {0} is outside (0, 1)")]
    InvalidTestFraction(f64),
    #[error("train side of the split is empty")]
    EmptyTrainSplit,
    #[error("cluster '{0}' has zero count")]
    EmptyCluster(String),
    #[error("budget {budget} cannot cover {iterations} iterations with at least one label each")]
    BudgetTooSmall { budget: usize, iterations: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("feature count must be at least 1")]
    ZeroDimensions,
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("loss vector contains a non-finite value at index {0}")]
    NonFiniteLoss(usize),
    #[error("unknown instance id {0}")]
    UnknownInstance(usize),
    #[error("sample {0} carried over from the previous iteration has no recorded weight")]
    MissingPreviousWeight(usize),
    #[error("cannot select {requested} samples from {available} candidates")]
    SelectionTooLarge { requested: usize, available: usize },
    #[error("budget {budget} exceeds the train pool size {pool}")]
    BudgetExceedsPool { budget: usize, pool: usize },
    #[error("prediction/truth length mismatch: {predictions} vs {truth}")]
    LengthMismatch { predictions: usize, truth: usize },
    #[error("budget ladder must be strictly increasing")]
    LadderNotIncreasing,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
