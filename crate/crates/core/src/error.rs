use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),

    #[error("invalid layer width: {0}")]
    InvalidWidth(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("every feature column was removed: {0}")]
    EmptyResult(String),

    #[error("column `{0}` has no present values")]
    AllMissingColumn(String),

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("group column missing; required by preset `{0}`")]
    MissingGroupColumn(String),

    #[error("could not parse {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid LDA hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("token `{0}` is not in the model vocabulary")]
    UnknownToken(String),

    #[error("{} patient(s) have no note tokens: {}", .0.len(), .0.join(", "))]
    NoNotes(Vec<String>),

    #[error("negative sample weight {value} at index {index}")]
    NegativeWeight { index: usize, value: f64 },

    #[error("group `{0}` has no members")]
    EmptyGroup(String),

    #[error("group `{group}` has no instances with label {label}")]
    EmptyCell { group: String, label: u8 },

    #[error("{metric} is undefined: {reason}")]
    UndefinedMetric { metric: &'static str, reason: String },

    #[error("no training samples")]
    EmptyData,

    #[error("labels contain a single class")]
    DegenerateLabels,

    #[error("both classes are required")]
    SingleClass,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dims(op: &'static str, detail: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            op,
            detail: detail.into(),
        }
    }
}
